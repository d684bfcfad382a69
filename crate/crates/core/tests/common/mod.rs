#![allow(dead_code)]

pub mod suite;

use gmclp::ingest::Rng;
use gmclp::lp::{build_lp_relaxation, simplex_solve, LpMode, LpModel};
use gmclp::model::{Customer, FacilityVector, Instance, Weight};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signs {
    Mixed,
    NonNegative,
    Negative,
}

/// Seeded small instance. About a quarter of the customers copy an earlier
/// coverage set so aggregation has work to do; a few weights are halves.
pub fn random_instance(seed: u64, max_facilities: usize, max_customers: usize, max_p: usize, signs: Signs) -> Instance {
    let mut rng = Rng::new(seed);
    let m = 2 + rng.below((max_facilities - 1) as u64) as usize;
    let p = 1 + rng.below(max_p.min(m) as u64) as usize;
    let n = 1 + rng.below(max_customers as u64) as usize;
    let mut customers: Vec<Customer> = Vec::with_capacity(n);
    for _ in 0..n {
        let coverage = if !customers.is_empty() && rng.below(4) == 0 {
            customers[rng.below(customers.len() as u64) as usize].coverage.clone()
        } else {
            let k = if rng.below(20) == 0 { 0 } else { 1 + rng.below(m.min(5) as u64) as usize };
            let mut all: Vec<usize> = (0..m).collect();
            for t in 0..k {
                let s = t + rng.below((m - t) as u64) as usize;
                all.swap(t, s);
            }
            all.truncate(k);
            all
        };
        let mag = 1 + rng.below(5) as i64;
        let denom = if rng.below(10) == 0 { 2 } else { 1 };
        let negative = match signs {
            Signs::Mixed => rng.below(2) == 0,
            Signs::NonNegative => false,
            Signs::Negative => true,
        };
        let w = if signs != Signs::Negative && rng.below(20) == 0 {
            Weight::from_integer(0)
        } else {
            Weight::new(if negative { -mag } else { mag }, denom)
        };
        customers.push(Customer::new(w, coverage));
    }
    Instance::new(m, p, customers).expect("valid random instance")
}

pub fn plain_model(inst: &Instance) -> LpModel {
    build_lp_relaxation(inst, None, LpMode { aggregated_cover: false, dominance_rows: false }).unwrap()
}

pub fn lp_value(model: &LpModel) -> f64 {
    let sol = simplex_solve(model, None);
    assert!(sol.is_optimal(), "lp status {:?}", sol.status);
    sol.objective
}

/// Random y with sum p and entries in [0, 1], in steps of 1/8.
pub fn random_fractional_y(rng: &mut Rng, m: usize, p: usize) -> FacilityVector {
    let steps = 8i64;
    let mut units = vec![0i64; m];
    let mut left = p as i64 * steps;
    while left > 0 {
        let i = rng.below(m as u64) as usize;
        if units[i] < steps {
            units[i] += 1;
            left -= 1;
        }
    }
    FacilityVector::new(units.into_iter().map(|u| Weight::new(u, steps)).collect())
}

/// Every p-subset of 0..m in lexicographic order.
pub fn subsets(m: usize, p: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..p).collect();
    loop {
        out.push(cur.clone());
        let mut k = p;
        while k > 0 && cur[k - 1] == m - p + k - 1 {
            k -= 1;
        }
        if k == 0 {
            return out;
        }
        cur[k - 1] += 1;
        for t in k..p {
            cur[t] = cur[t - 1] + 1;
        }
    }
}
