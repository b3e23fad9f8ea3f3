//! Designs, design spaces and prior model probabilities.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Two grid values closer than this are considered equal.
pub const GRID_TOL: f64 = 1e-9;

/// Finite, strictly increasing list of admissible values for one coordinate group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid(Vec<f64>);

impl Grid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSpace("empty grid".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpace("non-finite grid value".into()));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpace("grid must be strictly increasing".into()));
        }
        Ok(Grid(values))
    }

    /// `start, start + step, ...` up to and including `stop` (within rounding).
    pub fn stepped(start: f64, stop: f64, step: f64) -> Result<Self> {
        if step <= 0.0 || stop < start {
            return Err(Error::InvalidSpace(format!("bad grid range {start}..{stop} step {step}")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // Round to 1e-10 so decimal steps like 0.1 produce the values users type.
        let values = (0..n)
            .map(|i| ((start + i as f64 * step) * 1e10).round() / 1e10)
            .collect();
        Grid::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the grid value equal to `x`, if any.
    pub fn position(&self, x: f64) -> Option<usize> {
        let i = self.0.partition_point(|&g| g < x - GRID_TOL);
        (i < self.0.len() && (self.0[i] - x).abs() <= GRID_TOL).then_some(i)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.position(x).is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointPolicy {
    DistinctWithinGroup,
    RepeatsAllowed,
}

/// Time groups are order-free sets and are kept sorted; covariate groups are positional.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKind {
    Time,
    Covariate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub kind: GroupKind,
    pub size: usize,
    pub grid: Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSpace {
    pub name: String,
    pub groups: Vec<GroupSpec>,
    pub policy: PointPolicy,
}

impl DesignSpace {
    pub fn new(name: impl Into<String>, groups: Vec<GroupSpec>, policy: PointPolicy) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::InvalidSpace("no coordinate groups".into()));
        }
        if policy == PointPolicy::DistinctWithinGroup {
            if let Some(g) = groups.iter().find(|g| g.size > g.grid.len()) {
                return Err(Error::InvalidSpace(format!(
                    "group of size {} cannot hold distinct points from a grid of {}",
                    g.size,
                    g.grid.len()
                )));
            }
        }
        Ok(Self { name: name.into(), groups, policy })
    }

    pub fn n_coordinates(&self) -> usize {
        self.groups.iter().map(|g| g.size).sum()
    }

    /// Maps a flat coordinate index onto `(group, position)`.
    pub fn locate(&self, mut flat: usize) -> Option<(usize, usize)> {
        for (g, spec) in self.groups.iter().enumerate() {
            if flat < spec.size {
                return Some((g, flat));
            }
            flat -= spec.size;
        }
        None
    }

    /// Four-model epidemic: one time group of `n` distinct points on {0.25, ..., 10}.
    pub fn epi4(n: usize) -> Result<Self> {
        let grid = Grid::stepped(0.25, 10.0, 0.25)?;
        Self::new(
            format!("epi4-n{n}"),
            vec![GroupSpec { kind: GroupKind::Time, size: n, grid }],
            PointPolicy::DistinctWithinGroup,
        )
    }

    /// Two-model epidemic: `q` realisations observed at `nd` distinct times each on {0.5, ..., 10}.
    pub fn epi2(q: usize, nd: usize) -> Result<Self> {
        let grid = Grid::stepped(0.5, 10.0, 0.5)?;
        let groups = (0..q)
            .map(|_| GroupSpec { kind: GroupKind::Time, size: nd, grid: grid.clone() })
            .collect();
        Self::new(format!("epi2-q{q}-nd{nd}"), groups, PointPolicy::DistinctWithinGroup)
    }

    /// Macrophage: exposure duration on {0.1, ..., 1.5} h plus `n` observation times on {0.25, ..., 10} h.
    pub fn macrophage(n: usize) -> Result<Self> {
        Self::new(
            format!("macro-n{n}"),
            vec![
                GroupSpec { kind: GroupKind::Time, size: 1, grid: Grid::stepped(0.1, 1.5, 0.1)? },
                GroupSpec { kind: GroupKind::Time, size: n, grid: Grid::stepped(0.25, 10.0, 0.25)? },
            ],
            PointPolicy::RepeatsAllowed,
        )
    }

    /// Logistic regression with `n` observations: 4n covariates on {-1, -0.5, 0, 0.5, 1}.
    pub fn logistic(n: usize) -> Result<Self> {
        Self::new(
            format!("logistic-n{n}"),
            vec![GroupSpec {
                kind: GroupKind::Covariate,
                size: 4 * n,
                grid: Grid::new(vec![-1.0, -0.5, 0.0, 0.5, 1.0])?,
            }],
            PointPolicy::RepeatsAllowed,
        )
    }

    /// Resolves a preset name such as `epi4`, `epi2-q2-nd3`, `macro`,
    /// `logistic-fe-n6` or `logistic-re-G4`. `n_points` supplies the
    /// observation count where the name does not carry it.
    pub fn preset(name: &str, n_points: usize) -> Result<Self> {
        let bad = || Error::Config(format!("unknown design-space preset '{name}'"));
        if name == "epi4" {
            return Self::epi4(n_points);
        }
        if name == "macro" {
            return Self::macrophage(n_points);
        }
        if let Some(rest) = name.strip_prefix("epi2-q") {
            let (q, nd) = rest.split_once("-nd").ok_or_else(bad)?;
            return Self::epi2(q.parse().map_err(|_| bad())?, nd.parse().map_err(|_| bad())?);
        }
        if let Some(n) = name.strip_prefix("logistic-fe-n") {
            return Self::logistic(n.parse().map_err(|_| bad())?);
        }
        if let Some(g) = name.strip_prefix("logistic-re-G") {
            let g: usize = g.parse().map_err(|_| bad())?;
            return Self::logistic(g * crate::models::logistic::RE_GROUP_SIZE);
        }
        Err(bad())
    }

    /// Uniform grid choice per coordinate, each group resampled until policy-valid.
    pub fn random_design(&self, stream: RngStream) -> Design {
        let mut rng = stream.rng();
        let blocks = self
            .groups
            .iter()
            .map(|g| loop {
                let block: Vec<f64> = (0..g.size)
                    .map(|_| g.grid.values()[rng.random_range(0..g.grid.len())])
                    .collect();
                if self.policy == PointPolicy::RepeatsAllowed || !has_duplicates(&block) {
                    break block;
                }
            })
            .collect();
        let mut d = Design::new(blocks);
        sort_time_groups(&mut d, self);
        d
    }
}

fn has_duplicates(block: &[f64]) -> bool {
    let mut v = block.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).any(|w| (w[1] - w[0]).abs() <= GRID_TOL)
}

fn sort_time_groups(d: &mut Design, space: &DesignSpace) {
    for (block, spec) in d.blocks.iter_mut().zip(&space.groups) {
        if spec.kind == GroupKind::Time {
            block.sort_by(f64::total_cmp);
        }
    }
}

/// Ordered coordinate groups; semantics are family-specific.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub blocks: Vec<Vec<f64>>,
}

impl Design {
    pub fn new(blocks: Vec<Vec<f64>>) -> Self {
        Self { blocks }
    }

    pub fn single(times: Vec<f64>) -> Self {
        Self { blocks: vec![times] }
    }

    pub fn n_coordinates(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn coordinates(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks.iter().flatten().copied()
    }

    pub fn get(&self, group: usize, pos: usize) -> f64 {
        self.blocks[group][pos]
    }

    pub fn with_replaced(&self, group: usize, pos: usize, value: f64) -> Design {
        let mut d = self.clone();
        d.blocks[group][pos] = value;
        d
    }
}

/// `n` equally spaced points in `(0, upper]` excluding `upper`: `upper * i / (n + 1)`.
pub fn equidistant_times(n: usize, upper: f64) -> Vec<f64> {
    (1..=n).map(|i| upper * i as f64 / (n + 1) as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    Structure { detail: String },
    OffGrid { group: usize, position: usize, value: f64 },
    Unsorted { group: usize },
    Duplicate { group: usize, value: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Reports every violated invariant; never fails.
pub fn validate_design(d: &Design, space: &DesignSpace) -> ValidityReport {
    let mut violations = Vec::new();
    if d.blocks.len() != space.groups.len() {
        violations.push(Violation::Structure {
            detail: format!("expected {} groups, got {}", space.groups.len(), d.blocks.len()),
        });
        return ValidityReport { violations };
    }
    for (g, (block, spec)) in d.blocks.iter().zip(&space.groups).enumerate() {
        if block.len() != spec.size {
            violations.push(Violation::Structure {
                detail: format!("group {g}: expected {} coordinates, got {}", spec.size, block.len()),
            });
            continue;
        }
        for (pos, &value) in block.iter().enumerate() {
            if !spec.grid.contains(value) {
                violations.push(Violation::OffGrid { group: g, position: pos, value });
            }
        }
        if spec.kind == GroupKind::Time && block.windows(2).any(|w| w[1] < w[0]) {
            violations.push(Violation::Unsorted { group: g });
        }
        if space.policy == PointPolicy::DistinctWithinGroup {
            let mut sorted = block.clone();
            sorted.sort_by(f64::total_cmp);
            let mut last = None;
            for w in sorted.windows(2) {
                if (w[1] - w[0]).abs() <= GRID_TOL && last != Some(w[0]) {
                    violations.push(Violation::Duplicate { group: g, value: w[0] });
                    last = Some(w[0]);
                }
            }
        }
    }
    ValidityReport { violations }
}

/// Sorts time groups and snaps coordinates onto their grid values.
pub fn canonicalize_design(raw: &Design, space: &DesignSpace) -> Result<Design> {
    let report = validate_design(raw, space);
    for v in &report.violations {
        match v {
            Violation::Structure { detail } => return Err(Error::InvalidDesign(detail.clone())),
            Violation::OffGrid { group, position, value } => {
                return Err(Error::GridViolation(format!(
                    "group {group} position {position}: {value} is not a grid value"
                )))
            }
            Violation::Duplicate { group, value } => {
                return Err(Error::PolicyViolation(format!("group {group}: {value} repeated")))
            }
            Violation::Unsorted { .. } => {}
        }
    }
    let mut d = raw.clone();
    for (block, spec) in d.blocks.iter_mut().zip(&space.groups) {
        for x in block.iter_mut() {
            let i = spec.grid.position(*x).expect("validated on-grid");
            *x = spec.grid.values()[i];
        }
    }
    sort_time_groups(&mut d, space);
    Ok(d)
}

/// Prior probabilities `p(m)` over the K candidate models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PriorModelProbabilities(Vec<f64>);

impl PriorModelProbabilities {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidPriors("no models".into()));
        }
        if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidPriors("entries must be finite and non-negative".into()));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidPriors(format!("entries sum to {s}, not 1")));
        }
        Ok(Self(p))
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        let s: f64 = w.iter().sum();
        if !(s > 0.0) {
            return Err(Error::InvalidPriors("weights must have positive sum".into()));
        }
        Self::new(w.iter().map(|x| x / s).collect())
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    /// Draws a model index with probability `p(m)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (m, &p) in self.0.iter().enumerate() {
            acc += p;
            if u < acc {
                return m;
            }
        }
        self.0.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

impl TryFrom<Vec<f64>> for PriorModelProbabilities {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PriorModelProbabilities> for Vec<f64> {
    fn from(p: PriorModelProbabilities) -> Self {
        p.0
    }
}

/// Line-delimited record for a design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub blocks: Vec<Vec<f64>>,
    pub space: String,
    pub seed: u64,
}

impl DesignRecord {
    pub fn new(design: &Design, space: &DesignSpace, seed: u64) -> Self {
        Self { blocks: design.blocks.clone(), space: space.name.clone(), seed }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("design record serializes")
    }

    pub fn from_line(line: &str) -> Result<Self> {
        Ok(serde_json::from_str(line)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space_one(n: usize) -> DesignSpace {
        DesignSpace::epi4(n).unwrap()
    }

    #[test]
    fn grid_stepped_values() {
        let g = Grid::stepped(0.25, 10.0, 0.25).unwrap();
        assert_eq!(g.len(), 40);
        assert_eq!(g.values()[0], 0.25);
        assert_eq!(g.values()[39], 10.0);
        let g = Grid::stepped(0.1, 1.5, 0.1).unwrap();
        assert_eq!(g.len(), 15);
        assert_eq!(g.values()[2], 0.3);
        assert!(g.contains(0.3));
    }

    #[test]
    fn grid_rejects_non_increasing() {
        assert!(Grid::new(vec![1.0, 1.0]).is_err());
        assert!(Grid::new(vec![]).is_err());
    }

    #[test]
    fn canonicalize_sorted_is_identity() {
        let s = space_one(2);
        let d = Design::single(vec![1.0, 3.0]);
        assert_eq!(canonicalize_design(&d, &s).unwrap(), d);
    }

    #[test]
    fn canonicalize_sorts() {
        let s = space_one(2);
        let d = Design::single(vec![3.0, 1.0]);
        assert_eq!(canonicalize_design(&d, &s).unwrap().blocks, vec![vec![1.0, 3.0]]);
    }

    #[test]
    fn canonicalize_rejects_duplicates_under_distinct() {
        let s = space_one(2);
        let err = canonicalize_design(&Design::single(vec![2.0, 2.0]), &s).unwrap_err();
        assert!(matches!(err, Error::PolicyViolation(_)));
    }

    #[test]
    fn canonicalize_rejects_off_grid() {
        let s = space_one(1);
        let err = canonicalize_design(&Design::single(vec![0.33]), &s).unwrap_err();
        assert!(matches!(err, Error::GridViolation(_)));
    }

    #[test]
    fn validate_reports() {
        let s = space_one(2);
        assert!(validate_design(&Design::single(vec![0.5, 1.0]), &s).is_ok());
        let r = validate_design(&Design::single(vec![0.33, 1.0]), &s);
        assert!(matches!(r.violations[0], Violation::OffGrid { value, .. } if value == 0.33));
        let r = validate_design(&Design::single(vec![0.5, 0.5]), &s);
        assert_eq!(r.violations, vec![Violation::Duplicate { group: 0, value: 0.5 }]);
        let r = validate_design(&Design::single(vec![2.0, 1.0]), &s);
        assert_eq!(r.violations, vec![Violation::Unsorted { group: 0 }]);
    }

    #[test]
    fn covariate_groups_untouched() {
        let s = DesignSpace::logistic(1).unwrap();
        let d = Design::single(vec![1.0, -1.0, 0.5, 0.0]);
        assert_eq!(canonicalize_design(&d, &s).unwrap(), d);
    }

    #[test]
    fn presets_resolve() {
        assert_eq!(DesignSpace::preset("epi2-q2-nd3", 0).unwrap().n_coordinates(), 6);
        assert_eq!(DesignSpace::preset("macro", 2).unwrap().n_coordinates(), 3);
        assert_eq!(DesignSpace::preset("logistic-fe-n6", 0).unwrap().n_coordinates(), 24);
        assert_eq!(DesignSpace::preset("logistic-re-G2", 0).unwrap().n_coordinates(), 48);
        assert!(DesignSpace::preset("nope", 1).is_err());
    }

    #[test]
    fn random_designs_are_valid() {
        let s = space_one(5);
        for i in 0..50 {
            let d = s.random_design(RngStream::new(3).split(i));
            assert!(validate_design(&d, &s).is_ok());
        }
    }

    #[test]
    fn locate_flat_index() {
        let s = DesignSpace::macrophage(2).unwrap();
        assert_eq!(s.locate(0), Some((0, 0)));
        assert_eq!(s.locate(2), Some((1, 1)));
        assert_eq!(s.locate(3), None);
    }

    #[test]
    fn equidistant_matches_table_layout() {
        let t = equidistant_times(3, 10.0);
        assert_eq!(t, vec![2.5, 5.0, 7.5]);
        assert!((equidistant_times(2, 10.0)[0] - 3.333_333).abs() < 1e-5);
    }

    #[test]
    fn priors_validate() {
        assert!(PriorModelProbabilities::new(vec![0.5, 0.5]).is_ok());
        assert!(PriorModelProbabilities::new(vec![0.5, 0.6]).is_err());
        assert!(PriorModelProbabilities::new(vec![-0.1, 1.1]).is_err());
        let p = PriorModelProbabilities::from_weights(&[1.0, 3.0]).unwrap();
        assert_eq!(p.as_slice(), &[0.25, 0.75]);
    }

    #[test]
    fn design_record_round_trip() {
        let s = space_one(2);
        let d = Design::single(vec![0.75, 4.5]);
        let rec = DesignRecord::new(&d, &s, 9);
        let line = rec.to_line();
        assert!(line.contains("\"blocks\":[[0.75,4.5]]"));
        assert_eq!(DesignRecord::from_line(&line).unwrap(), rec);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn canonicalize_idempotent(seed in any::<u64>(), n in 1usize..6) {
                let s = DesignSpace::macrophage(n).unwrap();
                let d = s.random_design(RngStream::new(seed));
                // scramble then canonicalize
                let mut raw = d.clone();
                raw.blocks[1].reverse();
                let c1 = canonicalize_design(&raw, &s).unwrap();
                let c2 = canonicalize_design(&c1, &s).unwrap();
                prop_assert_eq!(&c1, &c2);
                prop_assert!(validate_design(&c1, &s).is_ok());
            }
        }
    }
}
