//! Property tests over the public API.

use crate::lattice::{neighbors, BallShape, InducedDomain};
use crate::potential::criteria::{egs_criterion, obt_box_criterion};
use crate::potential::dirichlet::solve_hit_probability;
use crate::psrw::{psrw_run, unguided_probe, ProbeCap, Strategy, StretchedLattice};
use crate::{DirichletProblem, Method, Metric, Schedule, Site, Streams};
use proptest::prelude::*;

fn ball2(r: f64) -> Vec<Site> {
    BallShape::new(Metric::Euclidean, r).sites(2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dirichlet_values_are_probabilities(r in 2.0f64..9.0, sx in -1i32..=1, sy in 1i32..=2) {
        let free: Vec<Site> = ball2(r).into_iter().filter(|z| !z.is_origin()).collect();
        let start = Site::from_slice(&[sx, sy]);
        let p = DirichletProblem::on_lattice(2, &free, |z| Some(z.is_origin() as u8 as f64), start).unwrap();
        let sol = p.solve(Method::Auto).unwrap();
        prop_assert!(sol.residual < 1e-10);
        prop_assert!(p.residual(&sol.values) < 1e-10);
        for v in &sol.values {
            prop_assert!((0.0..=1.0 + 1e-12).contains(v));
        }
    }

    #[test]
    fn more_killing_never_helps(r in 3.0f64..8.0, cut in 1i32..3) {
        let sites = ball2(r);
        let start = Site::from_slice(&[1, 1]);
        let outside: Vec<Site> = sites
            .iter()
            .flat_map(|&z| neighbors(z, 2))
            .filter(|y| !sites.contains(y))
            .collect();
        let free: Vec<Site> = sites.iter().copied().filter(|z| !z.is_origin()).collect();
        let base = solve_hit_probability(2, &free, &[Site::ORIGIN], &outside, start).unwrap();
        // kill a column as well
        let col: Vec<Site> = free.iter().copied().filter(|z| z.coord(0) == -cut).collect();
        let free2: Vec<Site> = free.iter().copied().filter(|z| z.coord(0) != -cut).collect();
        let killing: Vec<Site> = outside.iter().chain(&col).copied().collect();
        let less = solve_hit_probability(2, &free2, &[Site::ORIGIN], &killing, start).unwrap();
        prop_assert!(less <= base + 1e-12);
        // a larger target never hurts
        let target = [Site::ORIGIN, Site::from_slice(&[0, -1])];
        let free3: Vec<Site> = free.iter().copied().filter(|z| !target.contains(z)).collect();
        let more = solve_hit_probability(2, &free3, &target, &outside, start).unwrap();
        prop_assert!(more >= base - 1e-12);
    }

    #[test]
    fn criterion_partial_sums_increase(alpha in -1.0f64..3.0, dim in 2usize..=4) {
        let s = Schedule::power(alpha);
        prop_assert!(egs_criterion(&s, dim, 200).unwrap().is_monotone());
        if dim >= 3 {
            prop_assert!(obt_box_criterion(&s, dim, 200).unwrap().is_monotone());
        }
    }

    #[test]
    fn probe_exits_are_adjacent(seed in any::<u64>(), n in 1usize..20) {
        let dom = InducedDomain::from_sites(2, ball2(n as f64 / 4.0)).unwrap();
        let ext = dom.exterior_boundary();
        let mut rng = Streams::new(seed, 0).probe;
        for _ in 0..20 {
            let y = unguided_probe(&dom, Site::ORIGIN, &mut rng, 1_000_000, 0).unwrap();
            prop_assert!(ext.binary_search(&y).is_ok());
        }
    }

    #[test]
    fn stretched_lattice_neighbours_stay_on_lattice(x in -20i32..20, y in -20i32..20, l in 2i32..6) {
        let lat = StretchedLattice::new(l, 3).unwrap();
        let z = Site::from_slice(&[x * l, y * l, x + y]);
        prop_assert!(lat.contains(z));
        for (_, w) in lat.neighbors(z) {
            prop_assert!(lat.contains(w));
        }
    }

    #[test]
    fn coupon_budget_counts_sites(seed in any::<u64>(), dim in 2usize..=3) {
        let run = psrw_run(dim, &Strategy::UnguidedCoupon, 500, &[], ProbeCap::default(), false, &mut Streams::new(seed, 1)).unwrap();
        prop_assert_eq!(run.domain_sites, 1 + run.budget.total());
        let fv: u64 = run.first_visit_probes.iter().map(|&m| m as u64).sum();
        prop_assert_eq!(fv, run.budget.total());
    }
}
