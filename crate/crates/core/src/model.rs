//! Instances, facility vectors and solutions of the generalized maximal
//! covering location problem, together with the completion rule that turns
//! an opening pattern into customer coverage and a brute-force oracle.
//!
//! Facilities and customers are indexed from zero. File formats convert to
//! and from one-based indices at the boundary.

use std::fmt;

use num_rational::Rational64;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact customer weight.
pub type Weight = Rational64;

/// Default cap on the number of p-subsets the oracle will enumerate.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("facility vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("facility vector is not integral (entry {index})")]
    NotIntegral { index: usize },
    #[error("facility vector entry {index} lies outside [0, 1]")]
    OutOfUnitBox { index: usize },
    #[error("facility vector sums to {sum}, expected {p}")]
    WrongCardinality { sum: String, p: usize },
    #[error("{count} p-subsets exceed the enumeration cap of {cap}")]
    EnumerationCap { count: u64, cap: u64 },
    #[error("customer index {0} out of range")]
    CustomerOutOfRange(usize),
    #[error("invalid instance: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Customer {
    pub weight: Weight,
    /// Facilities able to cover this customer, strictly increasing.
    pub coverage: Vec<usize>,
}

impl Customer {
    /// Builds a customer, sorting the coverage list. Duplicates are kept so
    /// that [`validate_instance`] can report them.
    pub fn new(weight: Weight, mut coverage: Vec<usize>) -> Self {
        coverage.sort_unstable();
        Customer { weight, coverage }
    }

    pub fn is_negative(&self) -> bool {
        self.weight.is_negative()
    }

    pub fn covers(&self, facility: usize) -> bool {
        self.coverage.binary_search(&facility).is_ok()
    }
}

/// Where an instance came from. Not part of the instance's identity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: Option<String>,
    pub seed: Option<u64>,
    pub source: Option<String>,
    pub radius: Option<f64>,
    pub weight_scheme: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Instance {
    pub facility_count: usize,
    pub customers: Vec<Customer>,
    pub p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.facility_count == other.facility_count && self.p == other.p && self.customers == other.customers
    }
}

impl Instance {
    /// Builds an instance and rejects it when validation fails.
    pub fn new(facility_count: usize, p: usize, customers: Vec<Customer>) -> Result<Self, ModelError> {
        let inst = Instance { facility_count, customers, p, provenance: None };
        let report = validate_instance(&inst);
        if report.is_pass() {
            Ok(inst)
        } else {
            Err(ModelError::Invalid(report.to_string()))
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn customer_count(&self) -> usize {
        self.customers.len()
    }

    /// Indices of customers with strictly negative weight (the set N).
    pub fn negative_customers(&self) -> Vec<usize> {
        (0..self.customers.len()).filter(|&j| self.customers[j].is_negative()).collect()
    }

    pub fn nonnegative_customers(&self) -> Vec<usize> {
        (0..self.customers.len()).filter(|&j| !self.customers[j].is_negative()).collect()
    }

    pub fn has_integral_weights(&self) -> bool {
        self.customers.iter().all(|c| c.weight.is_integer())
    }

    pub fn weights(&self) -> Vec<Weight> {
        self.customers.iter().map(|c| c.weight).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoFacilities,
    PZero,
    PExceedsFacilityCount { p: usize, facility_count: usize },
    CoverageOutOfRange { customer: usize, index: usize },
    DuplicateCoverage { customer: usize, index: usize },
    UnsortedCoverage { customer: usize },
    NonFiniteWeight { customer: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoFacilities => write!(f, "instance has no facilities"),
            Violation::PZero => write!(f, "p must be at least 1"),
            Violation::PExceedsFacilityCount { p, facility_count } => {
                write!(f, "p exceeds facility count ({p} > {facility_count})")
            }
            Violation::CoverageOutOfRange { customer, index } => {
                write!(f, "coverage index out of range (customer {customer}, facility {index})")
            }
            Violation::DuplicateCoverage { customer, index } => {
                write!(f, "duplicate coverage entry (customer {customer}, facility {index})")
            }
            Violation::UnsortedCoverage { customer } => {
                write!(f, "coverage not sorted (customer {customer})")
            }
            Violation::NonFiniteWeight { customer } => {
                write!(f, "non-finite weight (customer {customer})")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_pass(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "pass");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks the structural invariants of an instance without failing.
pub fn validate_instance(inst: &Instance) -> ValidationReport {
    let mut violations = Vec::new();
    if inst.facility_count == 0 {
        violations.push(Violation::NoFacilities);
    }
    if inst.p == 0 {
        violations.push(Violation::PZero);
    } else if inst.p > inst.facility_count {
        violations.push(Violation::PExceedsFacilityCount { p: inst.p, facility_count: inst.facility_count });
    }
    for (j, c) in inst.customers.iter().enumerate() {
        if *c.weight.denom() == 0 {
            violations.push(Violation::NonFiniteWeight { customer: j });
        }
        let mut unsorted = false;
        for (pos, &i) in c.coverage.iter().enumerate() {
            if i >= inst.facility_count {
                violations.push(Violation::CoverageOutOfRange { customer: j, index: i });
            }
            if pos > 0 {
                let prev = c.coverage[pos - 1];
                if prev == i {
                    violations.push(Violation::DuplicateCoverage { customer: j, index: i });
                } else if prev > i {
                    unsorted = true;
                }
            }
        }
        if unsorted {
            violations.push(Violation::UnsortedCoverage { customer: j });
        }
    }
    ValidationReport { violations }
}

/// Facility values y, one per facility.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacilityVector {
    pub values: Vec<Weight>,
}

impl FacilityVector {
    pub fn new(values: Vec<Weight>) -> Self {
        FacilityVector { values }
    }

    /// The 0/1 vector opening exactly the listed facilities.
    pub fn from_open_set(facility_count: usize, open: &[usize]) -> Self {
        let mut values = vec![Weight::zero(); facility_count];
        for &i in open {
            values[i] = Weight::one();
        }
        FacilityVector { values }
    }

    /// Every facility at p / |I|.
    pub fn uniform(facility_count: usize, p: usize) -> Self {
        let v = Weight::new(p as i64, facility_count as i64);
        FacilityVector { values: vec![v; facility_count] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> Weight {
        self.values.iter().fold(Weight::zero(), |acc, v| acc + v)
    }

    pub fn is_integral(&self) -> bool {
        self.values.iter().all(|v| v.is_zero() || v.is_one())
    }

    pub fn open_facilities(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| self.values[i].is_one()).collect()
    }

    /// Checks membership in Y: 0/1 entries summing to p.
    pub fn check_integral(&self, inst: &Instance) -> Result<(), ModelError> {
        self.check_len(inst)?;
        if let Some(index) = self.values.iter().position(|v| !(v.is_zero() || v.is_one())) {
            return Err(ModelError::NotIntegral { index });
        }
        self.check_sum(inst)
    }

    /// Checks membership in Y_L: entries in [0, 1] summing to p.
    pub fn check_fractional(&self, inst: &Instance) -> Result<(), ModelError> {
        self.check_len(inst)?;
        if let Some(index) = self.values.iter().position(|v| v.is_negative() || *v > Weight::one()) {
            return Err(ModelError::OutOfUnitBox { index });
        }
        self.check_sum(inst)
    }

    fn check_len(&self, inst: &Instance) -> Result<(), ModelError> {
        if self.values.len() != inst.facility_count {
            return Err(ModelError::LengthMismatch { expected: inst.facility_count, got: self.values.len() });
        }
        Ok(())
    }

    fn check_sum(&self, inst: &Instance) -> Result<(), ModelError> {
        let sum = self.sum();
        if sum != Weight::from_integer(inst.p as i64) {
            return Err(ModelError::WrongCardinality { sum: sum.to_string(), p: inst.p });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub y: FacilityVector,
    pub x: Vec<bool>,
    pub objective: Weight,
}

impl Solution {
    pub fn open_facilities(&self) -> Vec<usize> {
        self.y.open_facilities()
    }
}

/// Completes x from an integral y: a customer is covered exactly when one
/// of its facilities is open.
pub fn complete_x_from_y(inst: &Instance, y: &FacilityVector) -> Result<Solution, ModelError> {
    y.check_integral(inst)?;
    let open: Vec<bool> = y.values.iter().map(|v| v.is_one()).collect();
    let x = covered_customers(inst, &open);
    let objective = weighted_sum(inst, &x);
    Ok(Solution { y: y.clone(), x, objective })
}

/// Weighted sum of min{1, y(I_j)} over all customers for an integral y.
pub fn evaluate_integer_objective(inst: &Instance, y: &FacilityVector) -> Result<Weight, ModelError> {
    y.check_integral(inst)?;
    let one = Weight::one();
    let mut total = Weight::zero();
    for c in &inst.customers {
        let covered_mass = c.coverage.iter().fold(Weight::zero(), |acc, &i| acc + y.values[i]);
        let term = if covered_mass < one { covered_mass } else { one };
        total += c.weight * term;
    }
    Ok(total)
}

/// Completion from a boolean opening pattern without cardinality checks.
pub(crate) fn covered_customers(inst: &Instance, open: &[bool]) -> Vec<bool> {
    inst.customers.iter().map(|c| c.coverage.iter().any(|&i| open[i])).collect()
}

pub(crate) fn weighted_sum(inst: &Instance, x: &[bool]) -> Weight {
    inst.customers.iter().zip(x).filter(|(_, &covered)| covered).fold(Weight::zero(), |acc, (c, _)| acc + c.weight)
}

/// Builds the completed solution for an open facility set.
pub fn solution_from_open_set(inst: &Instance, open: &[usize]) -> Result<Solution, ModelError> {
    complete_x_from_y(inst, &FacilityVector::from_open_set(inst.facility_count, open))
}

/// binomial(n, k), saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for t in 0..k {
        acc = acc * (n - t) as u128 / (t + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

pub fn brute_force_solve(inst: &Instance) -> Result<Solution, ModelError> {
    brute_force_solve_capped(inst, DEFAULT_ENUMERATION_CAP)
}

/// Enumerates every p-subset in lexicographic order and keeps the first
/// maximizer, so ties resolve to the lexicographically smallest open set.
pub fn brute_force_solve_capped(inst: &Instance, cap: u64) -> Result<Solution, ModelError> {
    let report = validate_instance(inst);
    if !report.is_pass() {
        return Err(ModelError::Invalid(report.to_string()));
    }
    let count = binomial(inst.facility_count, inst.p);
    if count > cap {
        return Err(ModelError::EnumerationCap { count, cap });
    }
    let n = inst.facility_count;
    let p = inst.p;
    let mut subset: Vec<usize> = (0..p).collect();
    let mut open = vec![false; n];
    let mut best: Option<(Weight, Vec<usize>)> = None;
    loop {
        open.iter_mut().for_each(|o| *o = false);
        for &i in &subset {
            open[i] = true;
        }
        let value = weighted_sum(inst, &covered_customers(inst, &open));
        if best.as_ref().map_or(true, |(b, _)| value > *b) {
            best = Some((value, subset.clone()));
        }
        // Advance to the next combination in lexicographic order.
        let mut t = p;
        loop {
            if t == 0 {
                let (_, set) = best.expect("at least one subset enumerated");
                return solution_from_open_set(inst, &set);
            }
            t -= 1;
            if subset[t] < n - p + t {
                subset[t] += 1;
                for u in t + 1..p {
                    subset[u] = subset[u - 1] + 1;
                }
                break;
            }
        }
    }
}

/// The two-customer toy family where both customers are covered by every
/// facility, with weights (|I|+1)/|I| and -1 and p = 1.
pub fn uniform_cover_example(facility_count: usize) -> Instance {
    let all: Vec<usize> = (0..facility_count).collect();
    let n = facility_count as i64;
    Instance {
        facility_count,
        p: 1,
        customers: vec![
            Customer::new(Weight::new(n + 1, n), all.clone()),
            Customer::new(Weight::from_integer(-1), all),
        ],
        provenance: None,
    }
}
