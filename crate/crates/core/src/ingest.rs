//! Instance ingestion and generation.
//!
//! All randomness comes from ChaCha8 seeded with a 64-bit seed. Floats are
//! drawn as `(next_u64 >> 11) * 2^-53` and bounded integers by rejection
//! sampling, so instances reproduce bit-for-bit on any platform.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use num_traits::Zero;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{validate_instance, Customer, Instance, Provenance, Weight};

pub const RNG_NAME: &str = "chacha8";
pub const PLANAR_SIDE: f64 = 30.0;
const NATIVE_MAGIC: &str = "GMCLP 1";

#[derive(Debug)]
pub enum IngestError {
    Io(io::Error),
    Parse { line: usize, msg: String },
    Invalid(String),
}

impl fmt::Display for IngestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IngestError::Io(e) => write!(f, "i/o error: {e}"),
            IngestError::Parse { line, msg } => write!(f, "line {line}: {msg}"),
            IngestError::Invalid(msg) => write!(f, "invalid: {msg}"),
        }
    }
}

impl std::error::Error for IngestError {}

impl From<io::Error> for IngestError {
    fn from(e: io::Error) -> Self {
        IngestError::Io(e)
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> IngestError {
    IngestError::Parse { line, msg: msg.into() }
}

/// Seeded portable random source.
pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform on [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on {0, .., n-1}. Panics when n is zero.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let v = self.0.next_u64();
            if v <= zone {
                return v % n;
            }
        }
    }
}

/// Symmetric matrix of nonnegative distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(n: usize, fill: f64) -> Self {
        let mut entries = vec![fill; n * n];
        for i in 0..n {
            entries[i * n + i] = 0.0;
        }
        DistanceMatrix { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn set_symmetric(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.n + j] = v;
        self.entries[j * self.n + i] = v;
    }

    /// Floyd-Warshall closure in place.
    pub fn close_shortest_paths(&mut self) {
        let n = self.n;
        for k in 0..n {
            for i in 0..n {
                let dik = self.entries[i * n + k];
                if dik.is_infinite() {
                    continue;
                }
                for j in 0..n {
                    let via = dik + self.entries[k * n + j];
                    if via < self.entries[i * n + j] {
                        self.entries[i * n + j] = via;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PmedData {
    pub distances: DistanceMatrix,
    pub n: usize,
    pub p: usize,
}

pub fn load_pmed(path: &Path) -> Result<PmedData, IngestError> {
    parse_pmed(&fs::read_to_string(path)?)
}

/// Parses the OR-Library p-median format: "n m p" followed by m edges
/// "u v cost" with one-based vertices.
pub fn parse_pmed(text: &str) -> Result<PmedData, IngestError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let head: Vec<usize> = parse_fields(header, hl + 1)?;
    if head.len() != 3 {
        return Err(parse_err(hl + 1, "header must be \"n m p\""));
    }
    let (n, m, p) = (head[0], head[1], head[2]);
    if n == 0 {
        return Err(parse_err(hl + 1, "vertex count must be positive"));
    }
    let mut d = DistanceMatrix::new(n, f64::INFINITY);
    let mut seen = 0;
    for (ln, line) in lines {
        let f: Vec<i64> = parse_fields(line, ln + 1)?;
        if f.len() != 3 {
            return Err(parse_err(ln + 1, "edge line must be \"u v cost\""));
        }
        let (u, v, c) = (f[0], f[1], f[2]);
        if u < 1 || v < 1 || u as usize > n || v as usize > n {
            return Err(parse_err(ln + 1, format!("vertex index out of range ({u}, {v})")));
        }
        if c <= 0 {
            return Err(parse_err(ln + 1, format!("nonpositive cost {c}")));
        }
        let (u, v) = (u as usize - 1, v as usize - 1);
        if u != v && (c as f64) < d.get(u, v) {
            d.set_symmetric(u, v, c as f64);
        }
        seen += 1;
    }
    if seen != m {
        return Err(parse_err(0, format!("expected {m} edges, found {seen}")));
    }
    d.close_shortest_paths();
    Ok(PmedData { distances: d, n, p })
}

fn parse_fields<T: std::str::FromStr>(line: &str, ln: usize) -> Result<Vec<T>, IngestError> {
    line.split_whitespace().map(|t| t.parse::<T>().map_err(|_| parse_err(ln, format!("bad number {t:?}")))).collect()
}

/// Nearest-rank percentile at q = 1/(2p) of the off-diagonal distances.
pub fn compute_coverage_radius(d: &DistanceMatrix, p: usize) -> f64 {
    assert!(d.n() >= 2 && p >= 1, "need n >= 2 and p >= 1");
    let mut pairs = Vec::with_capacity(d.n() * (d.n() - 1) / 2);
    for i in 0..d.n() {
        for j in i + 1..d.n() {
            pairs.push(d.get(i, j));
        }
    }
    nearest_rank(&mut pairs, p)
}

fn nearest_rank(values: &mut [f64], p: usize) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let m = values.len();
    // ceil(m / (2p)) computed in integers.
    let idx = (m + 2 * p - 1) / (2 * p);
    values[idx.clamp(1, m) - 1]
}

/// I_j = { i : d_ij <= R } with rows as customers and columns as facilities.
pub fn coverage_from_distances(d: &DistanceMatrix, radius: f64) -> Vec<Vec<usize>> {
    (0..d.n()).map(|j| (0..d.n()).filter(|&i| d.get(j, i) <= radius).collect()).collect()
}

/// Coverage sets without weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub facility_count: usize,
    pub p: usize,
    pub coverage: Vec<Vec<usize>>,
    pub provenance: Provenance,
}

/// Facilities then customers uniform on the 30 x 30 square; customer j is
/// covered by facility i when their Euclidean distance is at most `radius`.
pub fn generate_planar(n_customers: usize, n_facilities: usize, p: usize, radius: f64, seed: u64) -> Skeleton {
    let mut rng = Rng::new(seed);
    let point = |rng: &mut Rng| (PLANAR_SIDE * rng.next_f64(), PLANAR_SIDE * rng.next_f64());
    let facilities: Vec<(f64, f64)> = (0..n_facilities).map(|_| point(&mut rng)).collect();
    let customers: Vec<(f64, f64)> = (0..n_customers).map(|_| point(&mut rng)).collect();
    let r2 = radius * radius;
    let coverage = customers
        .iter()
        .map(|&(cx, cy)| {
            (0..n_facilities)
                .filter(|&i| {
                    let (fx, fy) = facilities[i];
                    let (dx, dy) = (cx - fx, cy - fy);
                    dx * dx + dy * dy <= r2
                })
                .collect()
        })
        .collect();
    Skeleton {
        facility_count: n_facilities,
        p,
        coverage,
        provenance: Provenance {
            generator: Some(format!("planar/{RNG_NAME}")),
            seed: Some(seed),
            source: None,
            radius: Some(radius),
            weight_scheme: None,
        },
    }
}

/// Builds a skeleton from a p-median graph: every vertex is a
/// facility site and a customer.
pub fn skeleton_from_pmed(data: &PmedData, p_override: Option<usize>, source: Option<String>) -> Skeleton {
    let p = p_override.unwrap_or(data.p);
    let radius = compute_coverage_radius(&data.distances, p);
    Skeleton {
        facility_count: data.n,
        p,
        coverage: coverage_from_distances(&data.distances, radius),
        provenance: Provenance {
            generator: Some("pmed".into()),
            seed: None,
            source,
            radius: Some(radius),
            weight_scheme: None,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    UnitAlternating,
    /// Share of negative customers in tenths (1, 3, 5, 7 or 9).
    RatioRandom {
        tenths: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightScheme {
    pub kind: WeightKind,
    pub seed: u64,
}

impl WeightScheme {
    pub fn unit() -> Self {
        WeightScheme { kind: WeightKind::UnitAlternating, seed: 0 }
    }

    pub fn ratio(ratio: f64, seed: u64) -> Result<Self, IngestError> {
        let tenths = (ratio * 10.0).round();
        if (ratio * 10.0 - tenths).abs() > 1e-9 || ![1.0, 3.0, 5.0, 7.0, 9.0].contains(&tenths) {
            return Err(IngestError::Invalid(format!("ratio {ratio} not in {{0.1, 0.3, 0.5, 0.7, 0.9}}")));
        }
        Ok(WeightScheme { kind: WeightKind::RatioRandom { tenths: tenths as u32 }, seed })
    }

    /// Parses "unit" or "ratio:R".
    pub fn parse(text: &str, seed: u64) -> Result<Self, IngestError> {
        if text == "unit" {
            return Ok(Self::unit());
        }
        match text.strip_prefix("ratio:").map(str::parse::<f64>) {
            Some(Ok(r)) => Self::ratio(r, seed),
            _ => Err(IngestError::Invalid(format!("unknown weight scheme {text:?}"))),
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            WeightKind::UnitAlternating => "unit".into(),
            WeightKind::RatioRandom { tenths } => format!("ratio:0.{tenths}"),
        }
    }
}

/// Number of negative customers for the ratio scheme, r*|J| rounded half up.
pub fn negative_count(tenths: u32, customers: usize) -> usize {
    (tenths as usize * customers + 5) / 10
}

pub fn assign_weights(skeleton: &Skeleton, scheme: &WeightScheme) -> Instance {
    let n = skeleton.coverage.len();
    let weights: Vec<Weight> = match scheme.kind {
        WeightKind::UnitAlternating => (0..n).map(|j| Weight::from_integer(if j % 2 == 0 { 1 } else { -1 })).collect(),
        WeightKind::RatioRandom { tenths } => {
            let mut rng = Rng::new(scheme.seed);
            let k = negative_count(tenths, n);
            let mut order: Vec<usize> = (0..n).collect();
            for t in 0..k {
                let s = t + rng.below((n - t) as u64) as usize;
                order.swap(t, s);
            }
            let mut negative = vec![false; n];
            for &j in &order[..k] {
                negative[j] = true;
            }
            (0..n)
                .map(|j| {
                    let mag = 1 + rng.below(100) as i64;
                    Weight::from_integer(if negative[j] { -mag } else { mag })
                })
                .collect()
        }
    };
    let customers = skeleton.coverage.iter().zip(weights).map(|(cov, w)| Customer::new(w, cov.clone())).collect();
    let mut provenance = skeleton.provenance.clone();
    provenance.weight_scheme = Some(scheme.label());
    Instance { facility_count: skeleton.facility_count, customers, p: skeleton.p, provenance: Some(provenance) }
}

pub fn write_coverage_string(inst: &Instance) -> String {
    let mut out = String::new();
    out.push_str(NATIVE_MAGIC);
    out.push('\n');
    out.push_str(&format!("{} {} {}\n", inst.facility_count, inst.customers.len(), inst.p));
    for c in &inst.customers {
        out.push_str(&c.weight.to_string());
        out.push(' ');
        out.push_str(&c.coverage.len().to_string());
        for &i in &c.coverage {
            out.push(' ');
            out.push_str(&(i + 1).to_string());
        }
        out.push('\n');
    }
    out
}

pub fn write_coverage_file(inst: &Instance, path: &Path) -> Result<(), IngestError> {
    fs::write(path, write_coverage_string(inst))?;
    Ok(())
}

pub fn parse_coverage_file(path: &Path) -> Result<Instance, IngestError> {
    let mut inst = parse_coverage_str(&fs::read_to_string(path)?)?;
    let mut prov = inst.provenance.take().unwrap_or_default();
    prov.source = Some(path.display().to_string());
    inst.provenance = Some(prov);
    Ok(inst)
}

pub fn parse_coverage_str(text: &str) -> Result<Instance, IngestError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == NATIVE_MAGIC => {}
        _ => return Err(parse_err(1, format!("expected {NATIVE_MAGIC:?}"))),
    }
    let (hl, header) = lines.next().ok_or_else(|| parse_err(2, "missing size line"))?;
    let head: Vec<usize> = parse_fields(header, hl + 1)?;
    if head.len() != 3 {
        return Err(parse_err(hl + 1, "size line must be \"|I| |J| p\""));
    }
    let (nf, nc, p) = (head[0], head[1], head[2]);
    if p == 0 || p > nf {
        return Err(parse_err(hl + 1, format!("p = {p} outside [1, {nf}]")));
    }
    let mut customers = Vec::with_capacity(nc);
    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if customers.len() == nc {
            return Err(parse_err(ln + 1, "more customer lines than declared"));
        }
        let mut tok = line.split_whitespace();
        let w: Weight = tok.next().and_then(|t| t.parse().ok()).ok_or_else(|| parse_err(ln + 1, "bad weight"))?;
        if w.denom().is_zero() {
            return Err(parse_err(ln + 1, "zero denominator"));
        }
        let k: usize = tok.next().and_then(|t| t.parse().ok()).ok_or_else(|| parse_err(ln + 1, "bad count"))?;
        let idx: Vec<usize> = tok
            .map(|t| t.parse::<usize>().map_err(|_| parse_err(ln + 1, format!("bad index {t:?}"))))
            .collect::<Result<_, _>>()?;
        if idx.len() != k {
            return Err(parse_err(ln + 1, format!("declared {k} facilities, found {}", idx.len())));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i == 0 || i > nf) {
            return Err(parse_err(ln + 1, format!("facility index {bad} out of range")));
        }
        customers.push(Customer::new(w, idx.into_iter().map(|i| i - 1).collect()));
    }
    if customers.len() != nc {
        return Err(parse_err(0, format!("declared {nc} customers, found {}", customers.len())));
    }
    let inst = Instance { facility_count: nf, customers, p, provenance: None };
    let report = validate_instance(&inst);
    if !report.is_pass() {
        return Err(IngestError::Invalid(report.to_string()));
    }
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pmed_path_closure() {
        let d = parse_pmed("3 2 1\n1 2 2\n2 3 3\n").unwrap();
        assert_eq!(d.distances.get(0, 2), 5.0);
        assert_eq!(d.p, 1);
    }

    #[test]
    fn pmed_detour_beats_edge() {
        let d = parse_pmed("3 3 1\n1 2 10\n2 3 1\n1 3 1\n").unwrap();
        assert_eq!(d.distances.get(0, 1), 2.0);
    }

    #[test]
    fn pmed_star_leaves() {
        let d = parse_pmed("4 3 1\n1 2 1\n1 3 1\n1 4 1\n").unwrap();
        for a in 1..4 {
            for b in 1..4 {
                if a != b {
                    assert_eq!(d.distances.get(a, b), 2.0);
                }
            }
        }
    }

    #[test]
    fn pmed_parallel_edges_keep_minimum() {
        let d = parse_pmed("2 2 1\n1 2 7\n2 1 3\n").unwrap();
        assert_eq!(d.distances.get(0, 1), 3.0);
    }

    #[test]
    fn pmed_errors() {
        assert!(matches!(parse_pmed("3 1\n"), Err(IngestError::Parse { .. })));
        assert!(matches!(parse_pmed("3 1 1\n1 4 2\n"), Err(IngestError::Parse { .. })));
        assert!(matches!(parse_pmed("3 1 1\n1 2 0\n"), Err(IngestError::Parse { .. })));
        assert!(matches!(parse_pmed("3 2 1\n1 2 1\n"), Err(IngestError::Parse { .. })));
    }

    #[test]
    fn nearest_rank_examples() {
        let base: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        assert_eq!(nearest_rank(&mut base.clone(), 1), 5.0);
        assert_eq!(nearest_rank(&mut base.clone(), 5), 1.0);
        assert_eq!(nearest_rank(&mut vec![4.0], 3), 4.0);
    }

    #[test]
    fn radius_on_two_vertices() {
        let d = parse_pmed("2 1 1\n1 2 9\n").unwrap();
        assert_eq!(compute_coverage_radius(&d.distances, 7), 9.0);
    }

    #[test]
    fn coverage_boundary_is_inclusive() {
        let d = parse_pmed("3 2 1\n1 2 2\n2 3 3\n").unwrap();
        let cov = coverage_from_distances(&d.distances, 2.0);
        assert_eq!(cov[0], vec![0, 1]);
        let cov0 = coverage_from_distances(&d.distances, 0.0);
        assert_eq!(cov0, vec![vec![0], vec![1], vec![2]]);
        let all = coverage_from_distances(&d.distances, 100.0);
        assert!(all.iter().all(|c| c.len() == 3));
    }

    #[test]
    fn planar_is_deterministic() {
        let a = generate_planar(50, 20, 2, 5.5, 11);
        let b = generate_planar(50, 20, 2, 5.5, 11);
        assert_eq!(a, b);
        let c = generate_planar(50, 20, 2, 5.5, 12);
        assert_ne!(a.coverage, c.coverage);
    }

    #[test]
    fn planar_zero_radius_is_empty() {
        let s = generate_planar(40, 10, 1, 0.0, 3);
        assert!(s.coverage.iter().all(|c| c.is_empty()));
    }

    #[test]
    fn unit_weights_alternate() {
        let s = generate_planar(4, 5, 1, 5.0, 1);
        let inst = assign_weights(&s, &WeightScheme::unit());
        let w: Vec<i64> = inst.customers.iter().map(|c| *c.weight.numer()).collect();
        assert_eq!(w, vec![1, -1, 1, -1]);
    }

    #[test]
    fn ratio_weights_count_and_range() {
        let s = generate_planar(10, 5, 1, 5.0, 1);
        let scheme = WeightScheme::ratio(0.5, 99).unwrap();
        let inst = assign_weights(&s, &scheme);
        assert_eq!(inst.negative_customers().len(), 5);
        for c in &inst.customers {
            let v = *c.weight.numer();
            assert!((1..=100).contains(&v.abs()));
        }
        assert_eq!(inst, assign_weights(&s, &scheme));
    }

    #[test]
    fn ratio_rounds_half_up() {
        assert_eq!(negative_count(5, 5), 3);
        assert_eq!(negative_count(1, 25), 3);
        assert_eq!(negative_count(3, 5), 2);
        assert_eq!(negative_count(9, 1000), 900);
    }

    #[test]
    fn ratio_rejects_unlisted_values() {
        assert!(WeightScheme::ratio(0.4, 1).is_err());
        assert!(WeightScheme::parse("ratio:0.7", 1).is_ok());
        assert!(WeightScheme::parse("bogus", 1).is_err());
    }

    #[test]
    fn below_is_in_range() {
        let mut rng = Rng::new(5);
        for n in 1..50u64 {
            assert!(rng.below(n) < n);
        }
        let f = rng.next_f64();
        assert!((0.0..1.0).contains(&f));
    }

    fn three_customers() -> Instance {
        Instance::new(
            4,
            1,
            vec![
                Customer::new(Weight::from_integer(1), vec![1, 2, 3]),
                Customer::new(Weight::from_integer(-1), vec![0, 1, 2]),
                Customer::new(Weight::new(-3, 2), vec![0, 3]),
                Customer::new(Weight::from_integer(0), vec![]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn native_round_trip() {
        let inst = three_customers();
        let text = write_coverage_string(&inst);
        assert!(text.starts_with("GMCLP 1\n4 4 1\n1 3 2 3 4\n"));
        assert!(text.contains("-3/2 2 1 4\n"));
        assert!(text.ends_with("0 0\n"));
        assert_eq!(parse_coverage_str(&text).unwrap(), inst);
    }

    #[test]
    fn native_rejects_bad_p_and_indices() {
        assert!(parse_coverage_str("GMCLP 1\n3 1 4\n1 1 1\n").is_err());
        assert!(parse_coverage_str("GMCLP 1\n3 1 1\n1 1 5\n").is_err());
        assert!(parse_coverage_str("GMCLP 1\n3 1 1\n1 2 1\n").is_err());
        assert!(parse_coverage_str("GMCLP 2\n3 1 1\n1 1 1\n").is_err());
        assert!(parse_coverage_str("GMCLP 1\n3 1 1\n1 2 1 1\n").is_err());
    }

    #[test]
    fn native_empty_coverage_line() {
        let inst = parse_coverage_str("GMCLP 1\n3 1 1\n2 0\n").unwrap();
        assert!(inst.customers[0].coverage.is_empty());
    }
}
