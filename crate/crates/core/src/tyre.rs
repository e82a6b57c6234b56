//! Magic-Formula longitudinal friction, road surface presets and
//! piecewise-constant road schedules.

use serde::{Deserialize, Serialize};

use crate::error::{AbsError, Result};

/// Magic-Formula coefficients `[B, C, D, E]` for one tyre/road pairing.
///
/// `d` is the peak friction coefficient. It is unrelated to the kernel
/// factor used when regularizing particles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagicParams {
    /// Stiffness factor.
    pub b: f64,
    /// Shape factor.
    pub c: f64,
    /// Peak factor.
    pub d: f64,
    /// Curvature factor.
    pub e: f64,
}

impl MagicParams {
    pub const DRY: MagicParams = MagicParams { b: 5.0, c: 1.4601, d: 1.3, e: -10.3522 };
    pub const WET: MagicParams = MagicParams { b: 10.695, c: 1.4, d: 0.8, e: -3.5 };
    pub const SNOW: MagicParams = MagicParams { b: 20.0, c: 1.5354, d: 0.3, e: 0.8525 };

    pub fn new(b: f64, c: f64, d: f64, e: f64) -> Self {
        MagicParams { b, c, d, e }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.b, self.c, self.d, self.e].iter().all(|v| v.is_finite());
        if !finite {
            return Err(AbsError::InvalidTyre(format!("non-finite coefficient in {self:?}")));
        }
        if self.b <= 0.0 || self.d <= 0.0 {
            return Err(AbsError::InvalidTyre(format!("B and D must be positive: {self:?}")));
        }
        if !(1.0..=2.0).contains(&self.c) {
            return Err(AbsError::InvalidTyre(format!("C must lie in [1, 2]: {self:?}")));
        }
        Ok(())
    }

    /// Friction coefficient at slip ratio `kappa`.
    #[inline]
    pub fn friction(&self, kappa: f64) -> f64 {
        friction(kappa, self)
    }
}

/// Signed friction coefficient `μ(κ)` from the Magic Formula.
///
/// Odd in `κ`; negative under braking.
#[inline]
pub fn friction(kappa: f64, theta: &MagicParams) -> f64 {
    let bk = theta.b * kappa;
    theta.d * (theta.c * (bk - theta.e * (bk - bk.atan())).atan()).sin()
}

/// Practical slip ratio `(ωR − U) / U`: 0 when free rolling, −1 at lock.
pub fn slip_ratio(omega: f64, speed: f64, radius: f64) -> Result<f64> {
    if speed <= 0.0 || !speed.is_finite() {
        return Err(AbsError::NonPositiveSpeed(speed));
    }
    Ok((omega * radius - speed) / speed)
}

/// Braking slip that produces the most negative friction on `[−1, 0]`.
///
/// A 0.01 coarse grid locates the basin, golden-section search refines it.
pub fn optimal_slip(theta: &MagicParams) -> f64 {
    const STEP: f64 = 0.01;
    let mut best_k = 0.0;
    let mut best_mu = f64::INFINITY;
    for i in 0..=100 {
        let k = -1.0 + i as f64 * STEP;
        let mu = friction(k, theta);
        if mu < best_mu {
            best_mu = mu;
            best_k = k;
        }
    }
    let lo = (best_k - STEP).max(-1.0);
    let hi = (best_k + STEP).min(0.0);
    golden_section_min(|k| friction(k, theta), lo, hi, 1e-12)
}

fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Named road surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Surface {
    Dry,
    Wet,
    Snow,
}

impl Surface {
    pub fn params(self) -> MagicParams {
        match self {
            Surface::Dry => MagicParams::DRY,
            Surface::Wet => MagicParams::WET,
            Surface::Snow => MagicParams::SNOW,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Surface::Dry => "dry",
            Surface::Wet => "wet",
            Surface::Snow => "snow",
        }
    }

    pub const ALL: [Surface; 3] = [Surface::Dry, Surface::Wet, Surface::Snow];
}

impl std::str::FromStr for Surface {
    type Err = AbsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dry" => Ok(Surface::Dry),
            "wet" => Ok(Surface::Wet),
            "snow" | "snowy" => Ok(Surface::Snow),
            other => Err(AbsError::UnknownSurface(other.to_string())),
        }
    }
}

/// Piecewise-constant road parameters over time.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadSchedule {
    segments: Vec<(f64, MagicParams)>,
}

impl RoadSchedule {
    /// Builds a schedule from `(switch time, params)` pairs. The first entry
    /// must start at `t = 0` and switch times must strictly increase.
    pub fn new(segments: Vec<(f64, MagicParams)>) -> Result<Self> {
        let Some(first) = segments.first() else {
            return Err(AbsError::Config("road schedule is empty".into()));
        };
        if first.0 != 0.0 {
            return Err(AbsError::Config(format!(
                "road schedule must start at t = 0, got {}",
                first.0
            )));
        }
        for w in segments.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(AbsError::Config(format!(
                    "road switch times must strictly increase ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        for (_, p) in &segments {
            p.validate()?;
        }
        Ok(RoadSchedule { segments })
    }

    pub fn constant(params: MagicParams) -> Self {
        RoadSchedule { segments: vec![(0.0, params)] }
    }

    pub fn segments(&self) -> &[(f64, MagicParams)] {
        &self.segments
    }

    /// Surface active at time `t`; right-continuous at switch times.
    pub fn at(&self, t: f64) -> MagicParams {
        road_at(t, self)
    }
}

pub fn road_at(t: f64, schedule: &RoadSchedule) -> MagicParams {
    let idx = schedule.segments.partition_point(|(ts, _)| *ts <= t);
    schedule.segments[idx.saturating_sub(1)].1
}
