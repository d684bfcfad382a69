//! Structural checks on the relaxation over seeded random instances. Each
//! returns the first counterexample found.

use std::collections::HashSet;

use gmclp::ingest::Rng;
use gmclp::lp::{
    build_lp_relaxation, coverage_slack, evaluate_aggregated_relaxed_objective, evaluate_relaxed_objective, LpMode,
};
use gmclp::model::{solution_from_open_set, Weight};
use gmclp::presolve::{
    build_dominance_pairs, isomorphic_aggregate, presolve_pipeline, AggregationScope, PresolveOptions,
};
use num_traits::{Signed, Zero};

use super::{lp_value, plain_model, random_fractional_y, random_instance, subsets, Signs};

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

pub const TOL: f64 = 1e-6;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

pub fn aggregation_identity_at_fractional_points(instances: u64) -> Result<(), String> {
    for seed in 0..instances {
        let inst = random_instance(seed, 8, 14, 3, Signs::Mixed);
        let (reduced, agg) = isomorphic_aggregate(&inst);
        let mut rng = Rng::new(1000 + seed);
        for _ in 0..20 {
            let y = random_fractional_y(&mut rng, inst.facility_count, inst.p);
            let z = evaluate_relaxed_objective(&inst, &y).unwrap();
            let z_agg = evaluate_aggregated_relaxed_objective(&reduced, &agg, &y).unwrap();
            let mut rhs = Weight::zero();
            for (k, group) in agg.groups.iter().enumerate() {
                let merged: Weight = group.iter().map(|&j| inst.customers[j].weight).fold(Weight::zero(), |a, b| a + b);
                let opposite: Weight = group
                    .iter()
                    .map(|&j| inst.customers[j].weight)
                    .filter(|w| if merged.is_negative() { w.is_positive() } else { w.is_negative() })
                    .fold(Weight::zero(), |a, b| a + b);
                rhs += opposite.abs() * coverage_slack(&reduced, k, &y).unwrap();
            }
            ensure!(z - z_agg == rhs, "seed {seed}: identity off by {}", z - z_agg - rhs);
        }
    }
    Ok(())
}

pub fn aggregation_keeps_lp_when_signs_agree(instances: u64) -> Result<(), String> {
    for seed in 0..instances {
        let signs = if seed % 2 == 0 { Signs::NonNegative } else { Signs::Negative };
        let inst = random_instance(seed, 8, 14, 3, signs);
        let (reduced, _) = isomorphic_aggregate(&inst);
        let a = lp_value(&plain_model(&inst));
        let b = lp_value(&plain_model(&reduced));
        ensure!(close(a, b), "seed {seed}: {a} vs {b}");
    }
    Ok(())
}

pub fn cross_dominance_rows_match_all_rows(instances: u64) -> Result<(), String> {
    for seed in 0..instances {
        let inst = random_instance(seed, 8, 14, 3, Signs::Mixed);
        let dom = build_dominance_pairs(&inst);
        let mut all = plain_model(&inst);
        for &(j, r) in &dom.all_pairs {
            all.add_dominance_row(j, r);
        }
        let mut cross = plain_model(&inst);
        for &(j, r) in &dom.cross_pairs {
            cross.add_dominance_row(j, r);
        }
        let (a, b) = (lp_value(&all), lp_value(&cross));
        ensure!(close(a, b), "seed {seed}: {a} vs {b}");
    }
    Ok(())
}

pub fn constraint_reduction_is_sound(instances: u64) -> Result<(), String> {
    let opts = PresolveOptions {
        aggregation: AggregationScope::All,
        p1: false,
        dominance: true,
        constraint_reduction: true,
        transitive_prune: false,
        p3: false,
    };
    let mut removals = 0;
    for seed in 0..instances {
        let inst = random_instance(seed, 8, 16, 3, Signs::Mixed);
        let (reduced, art, _) = presolve_pipeline(&inst, &opts).unwrap();
        let dom = &art.dominance;

        let mut full = plain_model(&reduced);
        for &(j, r) in dom.cross_pairs.iter().chain(&dom.negative_pairs(&reduced)) {
            full.add_dominance_row(j, r);
        }
        let mode = LpMode { aggregated_cover: false, dominance_rows: true };
        let reduced_lp = build_lp_relaxation(&reduced, Some(&art), mode).unwrap();
        let (a, b) = (lp_value(&full), lp_value(&reduced_lp));
        ensure!(close(a, b), "seed {seed}: {a} vs {b}");

        let removed: HashSet<(usize, usize)> =
            dom.removed_constraints.iter().flat_map(|(r, is)| is.iter().map(move |&i| (*r, i))).collect();
        removals += removed.len();
        fn implied(
            r: usize,
            i: usize,
            removed: &HashSet<(usize, usize)>,
            selected: &[(usize, usize)],
            cov: &dyn Fn(usize) -> Vec<usize>,
        ) -> bool {
            if !removed.contains(&(r, i)) {
                return cov(r).contains(&i);
            }
            selected.iter().any(|&(k, h)| h == r && cov(k).contains(&i) && implied(k, i, removed, selected, cov))
        }
        let cov = |j: usize| reduced.customers[j].coverage.clone();
        for &(r, i) in &removed {
            ensure!(implied(r, i, &removed, &dom.selected_negative_pairs, &cov), "seed {seed}: row ({r}, {i})");
        }
    }
    ensure!(removals > 0, "suite never exercised a removal");
    Ok(())
}

fn two_customer_lp(inst: &gmclp::Instance, pairs: &[(usize, usize)]) -> f64 {
    let mut m = plain_model(inst);
    for &(j, r) in pairs {
        let cov_r = &inst.customers[r].coverage;
        let diff: Vec<usize> = inst.customers[j].coverage.iter().copied().filter(|i| !cov_r.contains(i)).collect();
        m.add_two_customer_row(j, r, &diff);
    }
    lp_value(&m)
}

fn ordered_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|j| (0..n).filter(move |&r| r != j).map(move |r| (j, r))).collect()
}

pub fn cross_two_customer_rows_match_all_rows(instances: u64) -> Result<(), String> {
    for seed in 0..instances {
        let inst = random_instance(seed, 7, 10, 3, Signs::Mixed);
        let all = ordered_pairs(inst.customers.len());
        let cross: Vec<(usize, usize)> = all
            .iter()
            .copied()
            .filter(|&(j, r)| !inst.customers[j].is_negative() && inst.customers[r].is_negative())
            .collect();
        let (a, b) = (two_customer_lp(&inst, &all), two_customer_lp(&inst, &cross));
        ensure!(close(a, b), "seed {seed}: {a} vs {b}");
    }
    Ok(())
}

pub fn two_customer_rows_idle_when_signs_agree(instances: u64) -> Result<(), String> {
    for seed in 0..instances {
        let signs = if seed % 2 == 0 { Signs::NonNegative } else { Signs::Negative };
        let inst = random_instance(seed, 7, 10, 3, signs);
        let base = lp_value(&plain_model(&inst));
        let with = two_customer_lp(&inst, &ordered_pairs(inst.customers.len()));
        ensure!(close(base, with), "seed {seed}: {base} vs {with}");
    }
    Ok(())
}

pub fn two_customer_rows_hold_at_integral_points(instances: u64) -> Result<(), String> {
    for seed in 0..instances {
        let inst = random_instance(seed, 8, 12, 3, Signs::Mixed);
        for open in subsets(inst.facility_count, inst.p) {
            let sol = solution_from_open_set(&inst, &open).unwrap();
            let y = |i: usize| if sol.y.values[i].is_zero() { 0 } else { 1 };
            for (j, r) in ordered_pairs(inst.customers.len()) {
                let cov_r = &inst.customers[r].coverage;
                let outside: i32 =
                    inst.customers[j].coverage.iter().filter(|i| !cov_r.contains(i)).map(|&i| y(i)).sum();
                ensure!(
                    (sol.x[j] as i32) <= (sol.x[r] as i32) + outside,
                    "seed {seed}, open {open:?}, pair ({j}, {r})"
                );
            }
        }
    }
    Ok(())
}
