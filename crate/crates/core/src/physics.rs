//! Flow and power curves of the lagoon: orifice flow, its linear fill
//! approximation, the turbine hill chart and the basin mass balance.

use std::sync::OnceLock;

use crate::config::LagoonConfig;
use crate::schedule::Mode;

/// Upper end of the hill chart's head domain, m.
pub const HILL_CHART_MAX_HEAD_M: f64 = 8.0;
/// Head at which the flow curve switches from its rising to its flat branch, m.
pub const FLOW_KNEE_HEAD_M: f64 = 3.9;
/// Head at which turbines reach rated power and peak flow, m.
pub const RATED_HEAD_M: f64 = 7.0;
/// Highest head for which the linear fill law is intended, m.
pub const MAX_LINEAR_FIT_HEAD_M: f64 = 7.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PhysicsError {
    #[error("head {head_m} m outside the curve domain [{lo}, {hi}]")]
    OutOfDomain { head_m: f64, lo: f64, hi: f64 },
    #[error("head {head_m} m outside the configured bounds [{lo}, {hi}]")]
    HeadOutOfBounds { head_m: f64, lo: f64, hi: f64 },
    #[error("{requested} generating turbines requested but only {available} installed")]
    TooManyTurbines { requested: u32, available: u32 },
    #[error("invalid fit range [{lo}, {hi}]: need 0 < lo < hi <= 7")]
    DegenerateRange { lo: f64, hi: f64 },
    #[error("at least one sample is needed for a fit")]
    NoSamples,
    #[error("breakpoints must be strictly ascending with one more entry than segments")]
    BadBreakpoints,
}

/// `intercept + slope·H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub intercept: f64,
    pub slope: f64,
}

impl Affine {
    pub const fn new(intercept: f64, slope: f64) -> Self {
        Self { intercept, slope }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Piecewise affine function of head. Intervals are `[lo, hi)` except the
/// last, which is closed, so every head in the domain has exactly one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    breakpoints: Vec<f64>,
    segments: Vec<Affine>,
}

impl PiecewiseLinear {
    pub fn new(breakpoints: Vec<f64>, segments: Vec<Affine>) -> Result<Self, PhysicsError> {
        let ascending = breakpoints.windows(2).all(|w| w[0] < w[1]);
        if segments.is_empty() || breakpoints.len() != segments.len() + 1 || !ascending {
            return Err(PhysicsError::BadBreakpoints);
        }
        Ok(Self {
            breakpoints,
            segments,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[Affine] {
        &self.segments
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    pub fn segment_index(&self, x: f64) -> Result<usize, PhysicsError> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(PhysicsError::OutOfDomain { head_m: x, lo, hi });
        }
        let last = self.segments.len() - 1;
        Ok((0..last)
            .find(|&k| x < self.breakpoints[k + 1])
            .unwrap_or(last))
    }

    pub fn eval(&self, x: f64) -> Result<f64, PhysicsError> {
        Ok(self.segments[self.segment_index(x)?].eval(x))
    }
}

/// Turbine flow and power against head for one turbine.
///
/// Both curves share the breakpoints `0, h_min, 3.9, 7, 8` m; the power curve
/// uses the same affine piece on `[h_min, 3.9)` and `[3.9, 7)`. Coefficients
/// are used as fitted, so the curves are slightly discontinuous at 3.9 and 7 m.
#[derive(Debug, Clone, PartialEq)]
pub struct HillChart {
    h_min_m: f64,
    flow: PiecewiseLinear,
    power: PiecewiseLinear,
}

impl HillChart {
    pub fn new(h_min_m: f64) -> Result<Self, PhysicsError> {
        let bps = vec![
            0.0,
            h_min_m,
            FLOW_KNEE_HEAD_M,
            RATED_HEAD_M,
            HILL_CHART_MAX_HEAD_M,
        ];
        let flow = PiecewiseLinear::new(
            bps.clone(),
            vec![
                Affine::new(0.0, 0.0),
                Affine::new(92.99, 77.60),
                Affine::new(337.60, 14.81),
                Affine::new(807.19, -52.83),
            ],
        )?;
        let rising = Affine::new(-3.33, 3.33);
        let power = PiecewiseLinear::new(
            bps,
            vec![
                Affine::new(0.0, 0.0),
                rising,
                rising,
                Affine::new(20.0, 0.0),
            ],
        )?;
        Ok(Self {
            h_min_m,
            flow,
            power,
        })
    }

    pub fn for_config(config: &LagoonConfig) -> Result<Self, PhysicsError> {
        Self::new(config.h_min_m)
    }

    /// The chart with a 1 m start head.
    pub fn standard() -> &'static HillChart {
        static CHART: OnceLock<HillChart> = OnceLock::new();
        CHART.get_or_init(|| HillChart::new(1.0).expect("standard hill chart"))
    }

    pub fn h_min_m(&self) -> f64 {
        self.h_min_m
    }

    pub fn flow_curve(&self) -> &PiecewiseLinear {
        &self.flow
    }

    pub fn power_curve(&self) -> &PiecewiseLinear {
        &self.power
    }

    /// Generating flow through one turbine, m³/s.
    pub fn flow(&self, head_m: f64) -> Result<f64, PhysicsError> {
        self.flow.eval(head_m)
    }

    /// Power of one turbine, MW.
    pub fn power(&self, head_m: f64) -> Result<f64, PhysicsError> {
        self.power.eval(head_m)
    }
}

/// Signed orifice flow `sign(H)·C·A·√(2g|H|)`, m³/s.
pub fn orifice_flow(head_m: f64, coeff: f64, area_m2: f64, g: f64) -> f64 {
    let magnitude = coeff * area_m2 * (2.0 * g * head_m.abs()).sqrt();
    if head_m < 0.0 {
        -magnitude
    } else {
        magnitude
    }
}

/// Linearised fill flow `k·A·H`, m³/s.
pub fn linear_fill_flow(head_m: f64, k: f64, area_m2: f64) -> f64 {
    k * area_m2 * head_m
}

/// Least-squares slope `k` of `C·√(2gH) ≈ k·H` over `n_samples` uniform heads
/// in `[h_lo, h_hi]`. One sample means the single head `h_lo`.
pub fn fit_linear_coefficient(
    h_lo: f64,
    h_hi: f64,
    coeff: f64,
    g: f64,
    n_samples: usize,
) -> Result<f64, PhysicsError> {
    if !(h_lo > 0.0 && h_lo < h_hi && h_hi <= MAX_LINEAR_FIT_HEAD_M) {
        return Err(PhysicsError::DegenerateRange { lo: h_lo, hi: h_hi });
    }
    if n_samples == 0 {
        return Err(PhysicsError::NoSamples);
    }
    let spacing = if n_samples > 1 {
        (h_hi - h_lo) / (n_samples - 1) as f64
    } else {
        0.0
    };
    let (num, den) = (0..n_samples)
        .map(|j| h_lo + spacing * j as f64)
        .fold((0.0, 0.0), |(num, den), h| {
            (num + coeff * (2.0 * g * h).sqrt() * h, den + h * h)
        });
    Ok(num / den)
}

/// Generating flow of one turbine on the standard chart, m³/s.
pub fn turbine_gen_flow(head_m: f64) -> Result<f64, PhysicsError> {
    HillChart::standard().flow(head_m)
}

/// Power of one turbine on the standard chart, MW.
pub fn turbine_power(head_m: f64) -> Result<f64, PhysicsError> {
    HillChart::standard().power(head_m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowLaw {
    Linear,
    Nonlinear,
}

/// Flow through the lagoon wall split by path, m³/s, positive outwards.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlowComponents {
    /// All sluice gates together.
    pub sluice: f64,
    /// All turbines passing water while filling.
    pub turbine_fill: f64,
    /// All generating turbines.
    pub turbine_gen: f64,
    pub total: f64,
}

/// Flow through the wall for `mode` at `head_m`.
pub fn lagoon_flow(
    mode: Mode,
    head_m: f64,
    config: &LagoonConfig,
    chart: &HillChart,
    law: FlowLaw,
) -> Result<FlowComponents, PhysicsError> {
    let b = config.h_bounds_m;
    if !b.contains(head_m) {
        return Err(PhysicsError::HeadOutOfBounds {
            head_m,
            lo: b.lo,
            hi: b.hi,
        });
    }
    Ok(match mode {
        Mode::Hold => FlowComponents::default(),
        Mode::Fill => {
            let (per_sluice, per_turbine) = match law {
                FlowLaw::Linear => (
                    linear_fill_flow(head_m, config.k_sluice, config.sluice_area_m2),
                    linear_fill_flow(head_m, config.k_turbine, config.turbine_flow_area_m2),
                ),
                FlowLaw::Nonlinear => (
                    orifice_flow(
                        head_m,
                        config.discharge_coeff_sluice,
                        config.sluice_area_m2,
                        config.gravity_ms2,
                    ),
                    orifice_flow(
                        head_m,
                        config.discharge_coeff_turbine,
                        config.turbine_flow_area_m2,
                        config.gravity_ms2,
                    ),
                ),
            };
            let sluice = f64::from(config.n_sluices) * per_sluice;
            let turbine_fill = f64::from(config.n_turbines) * per_turbine;
            FlowComponents {
                sluice,
                turbine_fill,
                turbine_gen: 0.0,
                total: sluice + turbine_fill,
            }
        }
        Mode::Generate(n) => {
            if n > config.n_turbines {
                return Err(PhysicsError::TooManyTurbines {
                    requested: n,
                    available: config.n_turbines,
                });
            }
            let turbine_gen = if head_m >= chart.h_min_m() {
                f64::from(n) * chart.flow(head_m)?
            } else {
                0.0
            };
            FlowComponents {
                turbine_gen,
                total: turbine_gen,
                ..FlowComponents::default()
            }
        }
    })
}

/// Electrical output of the lagoon for `mode` at `head_m`, MW.
pub fn lagoon_power(mode: Mode, head_m: f64, chart: &HillChart) -> Result<f64, PhysicsError> {
    match mode {
        Mode::Generate(n) if head_m >= chart.h_min_m() => Ok(f64::from(n) * chart.power(head_m)?),
        _ => Ok(0.0),
    }
}

/// Basin level after passing `total_flow_m3s` for `dt_s` seconds.
pub fn step_level(z_in_m: f64, total_flow_m3s: f64, surface_area_m2: f64, dt_s: f64) -> f64 {
    z_in_m - total_flow_m3s * dt_s / surface_area_m2
}
