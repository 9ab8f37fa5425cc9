//! Cadlag paths on a finite horizon: a continuous piecewise-linear skeleton
//! plus an explicit finite jump list.
//!
//! The representation keeps jumps and left limits exact: `value(t)` is the
//! skeleton interpolation plus the sum of jumps at times `<= t`, and
//! `left_limit(t)` drops the jump exactly at `t`. Constructors canonicalize
//! the `constant-right` interpolation rule by converting skeleton steps into
//! explicit jumps, so downstream code always sees a continuous skeleton.
//!
//! Oscillation suprema are evaluated over the finite candidate set
//! {breakpoints, jump times, interval endpoints, left limits at excluded
//! endpoints}; this is exact for piecewise-linear skeletons because the norm
//! of a difference of linear functions is convex.

use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::space::{NormKind, NormedSpace, Vector};
use serde::{Deserialize, Serialize};

/// Skeleton interpolation rule accepted by constructors and the JSON format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    Linear,
    ConstantRight,
}

/// A single jump: time in `(0, T]` and a nonzero jump vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub delta: Vec<f64>,
}

/// Oscillation window selector.
///
/// `HalfOpenRight` measures over `]r,s] /\ [0,t]` (the O+ window), and
/// `OpenInterior` over `[r,s[ /\ [0,t]` (the O- window; equal to the open
/// interior window by right continuity).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OscMode {
    HalfOpenRight,
    OpenInterior,
}

/// Right-continuous path with left limits, represented exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "PathJson", try_from = "PathJson")]
pub struct CadlagPath {
    space: NormedSpace,
    horizon: f64,
    skel_times: Vec<f64>,
    skel_values: Vec<Vec<f64>>,
    jumps: Vec<Jump>,
    // jump_prefix[k] = sum of the first k jump vectors; len = jumps.len() + 1
    jump_prefix: Vec<Vec<f64>>,
}

impl CadlagPath {
    /// Build a path from a skeleton and a jump list.
    ///
    /// Under `ConstantRight` the skeleton steps become jumps at the interior
    /// breakpoints (merged with any explicit jump at the same time) and the
    /// stored skeleton degenerates to the constant `values[0]`.
    pub fn new(
        space: NormedSpace,
        horizon: f64,
        skeleton: Vec<(f64, Vec<f64>)>,
        interpolation: Interpolation,
        jumps: Vec<(f64, Vec<f64>)>,
    ) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::Invalid("horizon must be positive and finite".into()));
        }
        if skeleton.is_empty() {
            return Err(Error::Invalid(
                "skeleton must have at least one breakpoint".into(),
            ));
        }
        for (t, v) in &skeleton {
            if !t.is_finite() || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("skeleton"));
            }
            if v.len() != space.dim() {
                return Err(Error::DimensionMismatch {
                    expected: space.dim(),
                    got: v.len(),
                });
            }
        }
        if skeleton[0].0 != 0.0 {
            return Err(Error::Invalid("skeleton must start at t = 0".into()));
        }
        if skeleton[skeleton.len() - 1].0 != horizon {
            return Err(Error::Invalid("skeleton must end at the horizon".into()));
        }
        if skeleton.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Invalid(
                "skeleton times must be strictly increasing".into(),
            ));
        }

        type SkeletonParts = (Vec<f64>, Vec<Vec<f64>>, Vec<(f64, Vec<f64>)>);
        let (skel_times, skel_values, step_jumps): SkeletonParts = match interpolation {
            Interpolation::Linear => {
                let (ts, vs): (Vec<_>, Vec<_>) = skeleton.into_iter().unzip();
                (ts, vs, Vec::new())
            }
            Interpolation::ConstantRight => {
                // constant skeleton at values[0]; every step is a jump
                let base = skeleton[0].1.clone();
                let mut sj = Vec::new();
                for w in skeleton.windows(2) {
                    let d: Vec<f64> = w[1].1.iter().zip(&w[0].1).map(|(a, b)| a - b).collect();
                    if d.iter().any(|&x| x != 0.0) {
                        sj.push((w[1].0, d));
                    }
                }
                (vec![0.0, horizon], vec![base.clone(), base], sj)
            }
        };

        // merge explicit jumps with skeleton-step jumps, summing at equal times
        let mut merged: Vec<(f64, Vec<f64>)> = Vec::new();
        for (t, d) in jumps.into_iter().chain(step_jumps) {
            if !t.is_finite() || d.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("jumps"));
            }
            if d.len() != space.dim() {
                return Err(Error::DimensionMismatch {
                    expected: space.dim(),
                    got: d.len(),
                });
            }
            if t <= 0.0 {
                return Err(Error::Contract("jump at t = 0 is forbidden".into()));
            }
            if t > horizon {
                return Err(Error::TimeOutOfRange {
                    t,
                    lo: 0.0,
                    hi: horizon,
                });
            }
            merged.push((t, d));
        }
        merged.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut jumps_out: Vec<Jump> = Vec::new();
        for (t, d) in merged {
            match jumps_out.last_mut() {
                Some(j) if j.time == t => {
                    for (a, b) in j.delta.iter_mut().zip(&d) {
                        *a += b;
                    }
                }
                _ => jumps_out.push(Jump { time: t, delta: d }),
            }
        }
        jumps_out.retain(|j| j.delta.iter().any(|&x| x != 0.0));

        let mut jump_prefix = Vec::with_capacity(jumps_out.len() + 1);
        jump_prefix.push(vec![0.0; space.dim()]);
        for j in &jumps_out {
            let prev = jump_prefix.last().unwrap();
            jump_prefix.push(prev.iter().zip(&j.delta).map(|(a, b)| a + b).collect());
        }

        Ok(CadlagPath {
            space,
            horizon,
            skel_times,
            skel_values,
            jumps: jumps_out,
            jump_prefix,
        })
    }

    pub fn piecewise_linear(
        space: NormedSpace,
        horizon: f64,
        skeleton: Vec<(f64, Vec<f64>)>,
        jumps: Vec<(f64, Vec<f64>)>,
    ) -> Result<Self> {
        Self::new(space, horizon, skeleton, Interpolation::Linear, jumps)
    }

    /// Constant path.
    pub fn constant(space: NormedSpace, horizon: f64, value: Vec<f64>) -> Result<Self> {
        let end = value.clone();
        Self::piecewise_linear(space, horizon, vec![(0.0, value), (horizon, end)], vec![])
    }

    /// The indicator path `v * 1_{[s, oo)}` restricted to `[0, horizon]`.
    pub fn indicator(space: NormedSpace, horizon: f64, s: f64, v: Vec<f64>) -> Result<Self> {
        let zero = vec![0.0; space.dim()];
        Self::piecewise_linear(
            space,
            horizon,
            vec![(0.0, zero.clone()), (horizon, zero)],
            vec![(s, v)],
        )
    }

    /// Pure-jump path from a jump list (zero skeleton).
    pub fn pure_jump(
        space: NormedSpace,
        horizon: f64,
        jumps: Vec<(f64, Vec<f64>)>,
    ) -> Result<Self> {
        let zero = vec![0.0; space.dim()];
        Self::piecewise_linear(
            space,
            horizon,
            vec![(0.0, zero.clone()), (horizon, zero)],
            jumps,
        )
    }

    pub fn space(&self) -> NormedSpace {
        self.space
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn jump_times(&self) -> Vec<f64> {
        self.jumps.iter().map(|j| j.time).collect()
    }

    pub fn is_continuous(&self) -> bool {
        self.jumps.is_empty()
    }

    pub fn skeleton_times(&self) -> &[f64] {
        &self.skel_times
    }

    pub fn skeleton_values(&self) -> &[Vec<f64>] {
        &self.skel_values
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                lo: 0.0,
                hi: self.horizon,
            });
        }
        Ok(())
    }

    fn skeleton_at(&self, t: f64) -> Vec<f64> {
        let ts = &self.skel_times;
        let idx = match ts.binary_search_by(|p| p.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.skel_values[i].clone(),
            Err(i) => i,
        };
        // ts[idx-1] < t < ts[idx]
        let (t0, t1) = (ts[idx - 1], ts[idx]);
        let w = (t - t0) / (t1 - t0);
        self.skel_values[idx - 1]
            .iter()
            .zip(&self.skel_values[idx])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }

    /// Number of jumps with time `<= t`.
    fn jump_count_upto(&self, t: f64) -> usize {
        self.jumps.partition_point(|j| j.time <= t)
    }

    /// Right-continuous evaluation: skeleton plus all jumps at times `<= t`.
    pub fn value(&self, t: f64) -> Result<Vector> {
        self.check_time(t)?;
        let mut c = self.skeleton_at(t);
        let k = self.jump_count_upto(t);
        for (a, b) in c.iter_mut().zip(&self.jump_prefix[k]) {
            *a += b;
        }
        self.space.vector(c)
    }

    /// `X(t-)`: skeleton plus all jumps at times `< t`. Undefined at `t = 0`.
    pub fn left_limit(&self, t: f64) -> Result<Vector> {
        if t <= 0.0 {
            return Err(Error::Contract("left limit undefined at t = 0".into()));
        }
        self.check_time(t)?;
        let mut c = self.skeleton_at(t);
        let k = self.jumps.partition_point(|j| j.time < t);
        for (a, b) in c.iter_mut().zip(&self.jump_prefix[k]) {
            *a += b;
        }
        self.space.vector(c)
    }

    /// The stored jump at `t` (zero when `t` is not a jump time).
    pub fn jump_at(&self, t: f64) -> Vector {
        match self
            .jumps
            .binary_search_by(|j| j.time.partial_cmp(&t).unwrap())
        {
            Ok(i) => self.space.vector(self.jumps[i].delta.clone()).unwrap(),
            Err(_) => self.space.zero(),
        }
    }

    /// Jumps in `(0, t]` with norm `>= eps`, in time order.
    pub fn jump_set(&self, eps: f64, t: f64) -> Result<Vec<(f64, Vector)>> {
        if !eps.is_finite() || eps <= 0.0 {
            return Err(Error::Invalid("eps must be positive".into()));
        }
        self.check_time(t)?;
        Ok(self
            .jumps
            .iter()
            .take_while(|j| j.time <= t)
            .filter(|j| self.space.norm_of(&j.delta).unwrap() >= eps)
            .map(|j| (j.time, self.space.vector(j.delta.clone()).unwrap()))
            .collect())
    }

    /// `J_D(X)` and the complement `X - J_D(X)` for a set `D` of jump times.
    ///
    /// Errors when `D` contains a time that is not a jump time of the path.
    pub fn jump_truncation(&self, d: &[f64]) -> Result<(CadlagPath, CadlagPath)> {
        let mut keep = vec![false; self.jumps.len()];
        for &s in d {
            match self
                .jumps
                .binary_search_by(|j| j.time.partial_cmp(&s).unwrap())
            {
                Ok(i) => keep[i] = true,
                Err(_) => {
                    return Err(Error::Contract(format!(
                        "{s} is not a jump time of the path"
                    )))
                }
            }
        }
        let selected: Vec<(f64, Vec<f64>)> = self
            .jumps
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(j, _)| (j.time, j.delta.clone()))
            .collect();
        let rest: Vec<(f64, Vec<f64>)> = self
            .jumps
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| !k)
            .map(|(j, _)| (j.time, j.delta.clone()))
            .collect();
        let j_d = CadlagPath::pure_jump(self.space, self.horizon, selected)?;
        let complement = CadlagPath::piecewise_linear(
            self.space,
            self.horizon,
            self.skel_times
                .iter()
                .cloned()
                .zip(self.skel_values.iter().cloned())
                .collect(),
            rest,
        )?;
        Ok((j_d, complement))
    }

    /// `X - J_eps(X)`: remove every jump of norm `>= eps`.
    pub fn without_large_jumps(&self, eps: f64) -> Result<CadlagPath> {
        let d: Vec<f64> = self
            .jumps
            .iter()
            .filter(|j| self.space.norm_of(&j.delta).unwrap() >= eps)
            .map(|j| j.time)
            .collect();
        Ok(self.jump_truncation(&d)?.1)
    }

    /// Oscillation `sup |X(u) - X(v)|` over the window selected by `mode`,
    /// exact over the candidate set. Empty windows give 0.
    pub fn oscillation(&self, r: f64, s: f64, t: f64, mode: OscMode) -> Result<f64> {
        if !(r >= 0.0 && r < s) {
            return Err(Error::Contract(format!("need 0 <= r < s, got r={r} s={s}")));
        }
        self.check_time(t.min(self.horizon))?;
        let cands = match mode {
            OscMode::HalfOpenRight => {
                // ]r, s] n [0, t]  =  ]r, min(s,t)]
                let hi = s.min(t).min(self.horizon);
                if hi <= r {
                    return Ok(0.0);
                }
                self.candidate_values(r, hi, true)
            }
            OscMode::OpenInterior => {
                // [r, s[ n [0, t]: closed at t when t < s
                if t < r {
                    return Ok(0.0);
                }
                if t < s {
                    let hi = t.min(self.horizon);
                    self.candidate_values(r, hi, true)
                } else {
                    let hi = s.min(self.horizon);
                    if hi <= r {
                        return Ok(0.0);
                    }
                    self.candidate_values(r, hi, false)
                }
            }
        };
        Ok(set_diameter(self.space, &cands))
    }

    /// Candidate values over `(lo, hi]` / `[lo, hi)`-style windows. The left
    /// end always contributes `X(lo)` (right continuity makes it a closure
    /// point either way); `hi_included` selects `X(hi)` or only `X(hi-)`.
    fn candidate_values(&self, lo: f64, hi: f64, hi_included: bool) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        out.push(self.value(lo).unwrap().into_coords());
        let s_lo = self.skel_times.partition_point(|&bt| bt <= lo);
        let s_hi = self.skel_times.partition_point(|&bt| bt < hi);
        for &bt in &self.skel_times[s_lo..s_hi] {
            out.push(self.value(bt).unwrap().into_coords());
        }
        let j_lo = self.jumps.partition_point(|j| j.time <= lo);
        let j_hi = self.jumps.partition_point(|j| j.time < hi);
        for j in &self.jumps[j_lo..j_hi] {
            out.push(self.value(j.time).unwrap().into_coords());
            out.push(self.left_limit(j.time).unwrap().into_coords());
        }
        if hi > lo {
            out.push(self.left_limit(hi).unwrap().into_coords());
            if hi_included {
                out.push(self.value(hi).unwrap().into_coords());
            }
        }
        out
    }

    /// `(O+, O-)` of the path along a partition, up to time `t`.
    pub fn partition_oscillation(&self, pi: &Partition, t: f64) -> Result<(f64, f64)> {
        self.check_time(t)?;
        let mut o_plus = 0.0f64;
        let mut o_minus = 0.0f64;
        for (r, s) in pi.intervals() {
            if r >= t {
                break;
            }
            o_plus = o_plus.max(self.oscillation(r, s, t, OscMode::HalfOpenRight)?);
            o_minus = o_minus.max(self.oscillation(r, s, t, OscMode::OpenInterior)?);
        }
        Ok((o_plus, o_minus))
    }

    /// Pointwise sum of two paths on the same space and horizon.
    pub fn add(&self, other: &CadlagPath) -> Result<CadlagPath> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch("path addition".into()));
        }
        if self.horizon != other.horizon {
            return Err(Error::Invalid(
                "path addition requires equal horizons".into(),
            ));
        }
        let mut times: Vec<f64> = self
            .skel_times
            .iter()
            .chain(&other.skel_times)
            .cloned()
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup();
        let skeleton: Vec<(f64, Vec<f64>)> = times
            .iter()
            .map(|&t| {
                let a = self.skeleton_at(t);
                let b = other.skeleton_at(t);
                (t, a.iter().zip(&b).map(|(x, y)| x + y).collect())
            })
            .collect();
        let jumps: Vec<(f64, Vec<f64>)> = self
            .jumps
            .iter()
            .chain(&other.jumps)
            .map(|j| (j.time, j.delta.clone()))
            .collect();
        CadlagPath::piecewise_linear(self.space, self.horizon, skeleton, jumps)
    }

    pub fn scale(&self, a: f64) -> CadlagPath {
        let skeleton: Vec<(f64, Vec<f64>)> = self
            .skel_times
            .iter()
            .zip(&self.skel_values)
            .map(|(&t, v)| (t, v.iter().map(|x| a * x).collect()))
            .collect();
        let jumps: Vec<(f64, Vec<f64>)> = self
            .jumps
            .iter()
            .map(|j| (j.time, j.delta.iter().map(|x| a * x).collect()))
            .collect();
        CadlagPath::piecewise_linear(self.space, self.horizon, skeleton, jumps)
            .expect("scaling preserves validity")
    }

    /// The product path `(A, X)` in the direct-sum space `|a| + |x|`.
    pub fn product(a: &CadlagPath, x: &CadlagPath) -> Result<CadlagPath> {
        if a.horizon != x.horizon {
            return Err(Error::Invalid("product requires equal horizons".into()));
        }
        let space = NormedSpace::pair_sum(a.space, x.space)?;
        let (da, dx) = (a.space.dim(), x.space.dim());
        let mut times: Vec<f64> = a.skel_times.iter().chain(&x.skel_times).cloned().collect();
        times.sort_by(|p, q| p.partial_cmp(q).unwrap());
        times.dedup();
        let skeleton: Vec<(f64, Vec<f64>)> = times
            .iter()
            .map(|&t| {
                let mut v = a.skeleton_at(t);
                v.extend(x.skeleton_at(t));
                (t, v)
            })
            .collect();
        let mut jumps: Vec<(f64, Vec<f64>)> = Vec::new();
        for j in &a.jumps {
            let mut d = j.delta.clone();
            d.extend(vec![0.0; dx]);
            jumps.push((j.time, d));
        }
        for j in &x.jumps {
            let mut d = vec![0.0; da];
            d.extend(j.delta.clone());
            jumps.push((j.time, d));
        }
        CadlagPath::new(space, a.horizon, skeleton, Interpolation::Linear, jumps)
    }
}

/// Diameter `sup |u - v|` of a finite point set under the space's norm,
/// exact for every supported norm.
///
/// When the norm is a max of finitely many linear functionals, the diameter
/// is the max over those functionals of `(max - min)` of their values, which
/// is linear in the number of points: coordinate ranges for scalars and
/// LInf, sign-pattern ranges for L1 and for direct sums of two scalars.
/// Other norms use the exact pairwise scan; paths in those spaces carry few
/// candidates in practice.
fn set_diameter(space: NormedSpace, pts: &[Vec<f64>]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let dim = space.dim();
    let coord_ranges = || -> f64 {
        let mut best = 0.0f64;
        for i in 0..dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for p in pts {
                lo = lo.min(p[i]);
                hi = hi.max(p[i]);
            }
            best = best.max(hi - lo);
        }
        best
    };
    let sign_ranges = || -> f64 {
        // |w|_1 = max over sign patterns s of <s, w>
        let mut best = 0.0f64;
        for mask in 0..(1u32 << (dim - 1)) {
            // fix the first sign to +1; patterns come in +- pairs
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for p in pts {
                let mut dot = p[0];
                for (i, &coord) in p.iter().enumerate().skip(1) {
                    let s = if mask >> (i - 1) & 1 == 0 { 1.0 } else { -1.0 };
                    dot += s * coord;
                }
                lo = lo.min(dot);
                hi = hi.max(dot);
            }
            best = best.max(hi - lo);
        }
        best
    };
    let two_scalar_pair = matches!(space.kind(), NormKind::PairSum { left_dim: 1, .. }) && dim == 2;
    match space.kind() {
        _ if dim == 1 => coord_ranges(),
        NormKind::LInf => coord_ranges(),
        NormKind::L1 if dim <= 10 => sign_ranges(),
        _ if two_scalar_pair => sign_ranges(),
        _ => {
            let mut best = 0.0f64;
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    let d: Vec<f64> = pts[i].iter().zip(&pts[j]).map(|(a, b)| a - b).collect();
                    best = best.max(space.norm_of(&d).unwrap_or(0.0));
                }
            }
            best
        }
    }
}

/// A path of finite variation: in this representation every path qualifies,
/// so the wrapper marks the integrator role and carries the variation and
/// decomposition operations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FVPath(CadlagPath);

impl FVPath {
    pub fn new(path: CadlagPath) -> Self {
        FVPath(path)
    }

    pub fn path(&self) -> &CadlagPath {
        &self.0
    }

    pub fn into_path(self) -> CadlagPath {
        self.0
    }

    /// Exact total variation on `[a, b]`: skeleton arc variation plus the
    /// norms of the jumps in `(a, b]`.
    pub fn total_variation(&self, a: f64, b: f64) -> Result<f64> {
        let p = &self.0;
        if a > b {
            return Err(Error::Contract(format!("need a <= b, got a={a} b={b}")));
        }
        p.check_time(a)?;
        p.check_time(b)?;
        if a == b {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for i in 0..p.skel_times.len() - 1 {
            let (t0, t1) = (p.skel_times[i], p.skel_times[i + 1]);
            let lo = t0.max(a);
            let hi = t1.min(b);
            if hi <= lo {
                continue;
            }
            let d: Vec<f64> = p.skel_values[i + 1]
                .iter()
                .zip(&p.skel_values[i])
                .map(|(x, y)| x - y)
                .collect();
            let seg = p.space.norm_of(&d)?;
            total += seg * (hi - lo) / (t1 - t0);
        }
        for j in &p.jumps {
            if j.time > a && j.time <= b {
                total += p.space.norm_of(&j.delta)?;
            }
        }
        Ok(total)
    }

    /// `f = f^c + f^d`: the continuous skeleton part and the pure-jump part.
    pub fn jump_decomposition(&self) -> (FVPath, FVPath) {
        let p = &self.0;
        let continuous = CadlagPath::piecewise_linear(
            p.space,
            p.horizon,
            p.skel_times
                .iter()
                .cloned()
                .zip(p.skel_values.iter().cloned())
                .collect(),
            vec![],
        )
        .expect("skeleton is valid");
        let jump = CadlagPath::pure_jump(
            p.space,
            p.horizon,
            p.jumps.iter().map(|j| (j.time, j.delta.clone())).collect(),
        )
        .expect("jump list is valid");
        (FVPath(continuous), FVPath(jump))
    }
}

/// Evaluation interface shared by concrete paths and composed paths.
pub trait PathLike {
    fn space(&self) -> NormedSpace;
    fn horizon(&self) -> f64;
    fn value(&self, t: f64) -> Result<Vector>;
    fn left_limit(&self, t: f64) -> Result<Vector>;
    /// Times where the path may jump, sorted.
    fn discontinuity_times(&self) -> Vec<f64>;
    /// Times where smooth behavior may change (jumps plus skeleton breaks).
    fn segmentation_times(&self) -> Vec<f64> {
        self.discontinuity_times()
    }
}

impl PathLike for CadlagPath {
    fn space(&self) -> NormedSpace {
        self.space
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn value(&self, t: f64) -> Result<Vector> {
        CadlagPath::value(self, t)
    }

    fn left_limit(&self, t: f64) -> Result<Vector> {
        CadlagPath::left_limit(self, t)
    }

    fn discontinuity_times(&self) -> Vec<f64> {
        self.jump_times()
    }

    fn segmentation_times(&self) -> Vec<f64> {
        let mut ts = self.jump_times();
        ts.extend_from_slice(&self.skel_times);
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ts.dedup();
        ts
    }
}

/// A path composed through a continuous map `g = phi(inner)`. Left limits map
/// through by continuity.
pub struct MappedPath<'a, F: Fn(&Vector) -> Vector> {
    inner: &'a dyn PathLike,
    map: F,
    space: NormedSpace,
}

impl<'a, F: Fn(&Vector) -> Vector> MappedPath<'a, F> {
    pub fn new(inner: &'a dyn PathLike, space: NormedSpace, map: F) -> Self {
        MappedPath { inner, map, space }
    }
}

impl<'a, F: Fn(&Vector) -> Vector> PathLike for MappedPath<'a, F> {
    fn space(&self) -> NormedSpace {
        self.space
    }

    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    fn value(&self, t: f64) -> Result<Vector> {
        Ok((self.map)(&self.inner.value(t)?))
    }

    fn left_limit(&self, t: f64) -> Result<Vector> {
        Ok((self.map)(&self.inner.left_limit(t)?))
    }

    fn discontinuity_times(&self) -> Vec<f64> {
        self.inner.discontinuity_times()
    }

    fn segmentation_times(&self) -> Vec<f64> {
        self.inner.segmentation_times()
    }
}

/// JSON shape: `{space, horizon, skeleton: [[t, coords...]...], interpolation,
/// jumps: [[s, coords...]...]}`. Serialization always emits the canonical
/// linear form; `constant-right` is accepted on input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathJson {
    pub space: NormedSpace,
    pub horizon: f64,
    pub skeleton: Vec<Vec<f64>>,
    pub interpolation: Interpolation,
    pub jumps: Vec<Vec<f64>>,
}

impl From<CadlagPath> for PathJson {
    fn from(p: CadlagPath) -> Self {
        let skeleton = p
            .skel_times
            .iter()
            .zip(&p.skel_values)
            .map(|(&t, v)| {
                let mut row = Vec::with_capacity(v.len() + 1);
                row.push(t);
                row.extend_from_slice(v);
                row
            })
            .collect();
        let jumps = p
            .jumps
            .iter()
            .map(|j| {
                let mut row = Vec::with_capacity(j.delta.len() + 1);
                row.push(j.time);
                row.extend_from_slice(&j.delta);
                row
            })
            .collect();
        PathJson {
            space: p.space,
            horizon: p.horizon,
            skeleton,
            interpolation: Interpolation::Linear,
            jumps,
        }
    }
}

impl TryFrom<PathJson> for CadlagPath {
    type Error = Error;

    fn try_from(j: PathJson) -> Result<CadlagPath> {
        let split = |rows: Vec<Vec<f64>>, what: &str| -> Result<Vec<(f64, Vec<f64>)>> {
            rows.into_iter()
                .map(|mut row| {
                    if row.is_empty() {
                        return Err(Error::Invalid(format!("empty {what} row")));
                    }
                    let t = row.remove(0);
                    Ok((t, row))
                })
                .collect()
        };
        CadlagPath::new(
            j.space,
            j.horizon,
            split(j.skeleton, "skeleton")?,
            j.interpolation,
            split(j.jumps, "jump")?,
        )
    }
}
