use proptest::prelude::*;

use dual_irs_opt::allocation::{solve_allocation, AllocationCoefficients};
use dual_irs_opt::ao::{audit, solve};
use dual_irs_opt::closed_form::min_rate;
use dual_irs_opt::model::{Allocation, Geometry, Placement, SystemParams};
use dual_irs_opt::placement::{placement_objective, solve_placement, PlacementCoefficients};
use dual_irs_opt::scenario::{draw_users, parse_scenario, Scenario};

fn setup(m: usize, users: usize, seed: u64, d: f64, h: f64) -> (SystemParams, Geometry) {
    let params = SystemParams { total_elements: m, n_users: users, ..SystemParams::default() };
    (params, Geometry::new(d, h, draw_users(seed, users, 30.0)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ao_beats_even_spread_and_passes_audit(
        m in 16usize..256,
        users in 1usize..=4,
        seed in 0u64..1000,
        d in 100.0f64..300.0,
        h in 3.0f64..10.0,
    ) {
        let (p, g) = setup(m, users, seed, d, h);
        let s = solve(&p, &g).unwrap();
        audit(&p, &g, &s).unwrap();
        let start = min_rate(&p, &g, &Placement::spread(&g), &Allocation::even(m)).unwrap();
        prop_assert!(s.report.min_rate >= start.min_rate * (1.0 - 1e-12));
    }

    #[test]
    fn sca_never_worse_than_its_start(
        m1 in 4usize..124,
        users in 1usize..=4,
        seed in 0u64..1000,
        d in 100.0f64..300.0,
    ) {
        let (p, g) = setup(128, users, seed, d, 5.0);
        let a = Allocation::new(m1, 128 - m1);
        let coeffs = PlacementCoefficients::for_allocation(&p, &a);
        let init = Placement::spread(&g);
        let out = solve_placement(&p, &g, &a, init).unwrap();
        out.validate(&g).unwrap();
        prop_assert!(
            placement_objective(&coeffs, &g, &out).unwrap()
                <= placement_objective(&coeffs, &g, &init).unwrap() * (1.0 + 1e-12)
        );
    }

    #[test]
    fn larger_budget_never_lowers_rate(
        m in 8usize..512,
        seed in 0u64..1000,
    ) {
        let (p, g) = setup(m, 2, seed, 200.0, 5.0);
        let placement = Placement::spread(&g);
        let rate = |p: &SystemParams| {
            let c = AllocationCoefficients::for_placement(p, &g, &placement).unwrap();
            let a = solve_allocation(&c, p.total_elements).unwrap();
            min_rate(p, &g, &placement, &a).unwrap().min_rate
        };
        let bigger = SystemParams { total_elements: m + 2, ..p.clone() };
        prop_assert!(rate(&bigger) >= rate(&p));
    }

    #[test]
    fn scenario_text_round_trips_with_fixed_users(
        m in 2usize..4096,
        users in 1usize..=6,
        seed in 0u64..10_000,
        d in 50.0f64..500.0,
    ) {
        let mut s = Scenario { seed, bs_user_distance: d, ..Scenario::default() };
        s.params.total_elements = m;
        s.params.n_users = users;
        s.users = Some(draw_users(seed, users, s.zone_radius));
        let back = parse_scenario(&s.to_text()).unwrap();
        prop_assert_eq!(back.geometry(), s.geometry());
        prop_assert_eq!(back.params, s.params);
    }
}
