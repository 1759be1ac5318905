use crate::config::LagoonConfig;
use crate::physics::{Affine, HillChart, PhysicsError};
use crate::schedule::Objective;
use crate::series::{PriceSeries, TideSeries};

use super::{MilpModel, Sense, Symbol, VarId, VarKey, VarKind};

/// Upper bound on one turbine's power, MW.
pub const POWER_BOUND_MW: f64 = 20.0;

/// One head interval of the hill-chart encoding with its flow and power pieces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilpSegment {
    pub lo: f64,
    pub hi: f64,
    pub flow: Affine,
    pub power: Affine,
}

/// Hill-chart segments stretched over the whole head range. The first piece
/// (zero flow and power) also covers negative heads, where a turbine marked
/// as generating passes nothing.
pub(crate) fn segments(config: &LagoonConfig, chart: &HillChart) -> Vec<MilpSegment> {
    let bps = chart.flow_curve().breakpoints();
    let flows = chart.flow_curve().segments();
    let powers = chart.power_curve().segments();
    (0..flows.len())
        .map(|k| MilpSegment {
            lo: if k == 0 { config.h_bounds_m.lo } else { bps[k] },
            hi: if k + 1 == flows.len() {
                config.h_bounds_m.hi
            } else {
                bps[k + 1]
            },
            flow: flows[k],
            power: powers[k],
        })
        .collect()
}

/// Bound on one turbine's generating flow: the curve maximum rounded up to
/// the next multiple of 50 m³/s.
pub fn gen_flow_bound(chart: &HillChart) -> f64 {
    let curve = chart.flow_curve();
    let bps = curve.breakpoints();
    let peak = curve
        .segments()
        .iter()
        .enumerate()
        .flat_map(|(k, seg)| [seg.eval(bps[k]), seg.eval(bps[k + 1])])
        .fold(0.0, f64::max);
    (peak / 50.0).ceil() * 50.0
}

/// Big-M for `|y − piece(H)|` with `y` in `[0, y_max]` and `H` in the head bounds.
fn piece_big_m(piece: Affine, y_max: f64, h_lo: f64, h_hi: f64) -> f64 {
    let (a, b) = (piece.eval(h_lo), piece.eval(h_hi));
    (y_max - a.min(b)).max(a.max(b)).max(0.0)
}

/// Builds the full model for `tide` and `prices` under `objective`.
pub fn build_milp(
    config: &LagoonConfig,
    tide: &TideSeries,
    prices: &PriceSeries,
    objective: Objective,
) -> Result<MilpModel, PhysicsError> {
    let chart = HillChart::for_config(config)?;
    let segs = segments(config, &chart);
    let q_bar = gen_flow_bound(&chart);
    let p_bar = POWER_BOUND_MW;
    let steps = tide.steps().min(prices.len());
    let n_t = config.n_turbines as usize;
    let bounds = config.h_bounds_m;
    let big_m_head = bounds.span();
    let conductance = config.fill_conductance();
    let (fill_lo, fill_hi) = (conductance * bounds.lo, conductance * bounds.hi);
    let inf = f64::INFINITY;

    let mut m = MilpModel::empty(config.clone(), objective);
    m.metadata.steps = steps;
    m.metadata.segments = segs.len();
    m.z_out = tide.levels_m[..=steps].to_vec();
    m.segments = segs.clone();

    let mut zin = Vec::with_capacity(steps + 1);
    let mut head = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        zin.push(m.add_var(
            VarKey::step(Symbol::InsideLevel, t),
            VarKind::Continuous,
            -inf,
            inf,
        ));
        head.push(m.add_var(
            VarKey::step(Symbol::Head, t),
            VarKind::Continuous,
            bounds.lo,
            bounds.hi,
        ));
    }

    m.add_row(
        "init".into(),
        Some(0),
        vec![(zin[0], 1.0)],
        Sense::Eq,
        tide.level(0),
    );
    for t in 0..=steps {
        m.add_row(
            format!("head_{t}"),
            Some(t),
            vec![(head[t], 1.0), (zin[t], -1.0)],
            Sense::Eq,
            -tide.level(t),
        );
    }

    let mut energy = Vec::with_capacity(steps);
    for t in 0..steps {
        let step_var = |m: &mut MilpModel, s: Symbol, lo: f64, hi: f64| {
            m.add_var(VarKey::step(s, t), VarKind::Continuous, lo, hi)
        };
        let d_fill = m.add_var(
            VarKey::step(Symbol::FillBinary, t),
            VarKind::Binary,
            0.0,
            1.0,
        );
        let q_sluice = step_var(&mut m, Symbol::SluiceFlow, -inf, inf);
        let q_fill = step_var(&mut m, Symbol::FillFlow, fill_lo, fill_hi);
        let z_fill = step_var(&mut m, Symbol::FillAux, fill_lo, fill_hi);
        let q_total = step_var(&mut m, Symbol::TotalFlow, -inf, inf);
        let power = step_var(&mut m, Symbol::Power, 0.0, inf);
        let e = step_var(&mut m, Symbol::Energy, 0.0, inf);
        energy.push(e);

        let h = head[t];
        let row = |m: &mut MilpModel, name: String, terms: Vec<(VarId, f64)>, sense, rhs| {
            m.add_row(name, Some(t), terms, sense, rhs)
        };

        row(
            &mut m,
            format!("balance_{t}"),
            vec![
                (zin[t + 1], 1.0),
                (zin[t], -1.0),
                (q_total, config.dt_s / config.surface_area_m2),
            ],
            Sense::Eq,
            0.0,
        );
        row(
            &mut m,
            format!("sluice_{t}"),
            vec![
                (q_sluice, 1.0),
                (h, -config.k_sluice * config.sluice_area_m2),
            ],
            Sense::Eq,
            0.0,
        );

        let mut fill_terms = vec![(q_fill, 1.0), (q_sluice, -f64::from(config.n_sluices))];
        let mut total_terms = vec![(q_total, 1.0), (z_fill, -1.0)];
        let mut power_terms = vec![(power, 1.0)];

        for i in 0..n_t {
            let tvar = |m: &mut MilpModel, s: Symbol, kind, lo: f64, hi: f64| {
                m.add_var(VarKey::turbine(s, i, t), kind, lo, hi)
            };
            let q_tfill = tvar(
                &mut m,
                Symbol::TurbineFillFlow,
                VarKind::Continuous,
                -inf,
                inf,
            );
            let d_gen = tvar(&mut m, Symbol::GenBinary, VarKind::Binary, 0.0, 1.0);
            let seg_vars: Vec<VarId> = (0..segs.len())
                .map(|k| m.add_var(VarKey::segment(k, i, t), VarKind::Binary, 0.0, 1.0))
                .collect();
            let q_gen = tvar(&mut m, Symbol::GenFlow, VarKind::Continuous, 0.0, q_bar);
            let p_turb = tvar(
                &mut m,
                Symbol::TurbinePower,
                VarKind::Continuous,
                0.0,
                p_bar,
            );
            let z_gen = tvar(&mut m, Symbol::GenAux, VarKind::Continuous, 0.0, q_bar);
            let z_pow = tvar(&mut m, Symbol::PowerAux, VarKind::Continuous, 0.0, p_bar);

            row(
                &mut m,
                format!("tfill_{i}_{t}"),
                vec![
                    (q_tfill, 1.0),
                    (h, -config.k_turbine * config.turbine_flow_area_m2),
                ],
                Sense::Eq,
                0.0,
            );
            fill_terms.push((q_tfill, -1.0));

            // Hill chart: exactly one segment; the segment pins the head interval
            // and both curve values.
            row(
                &mut m,
                format!("segsum_{i}_{t}"),
                seg_vars.iter().map(|&s| (s, 1.0)).collect(),
                Sense::Eq,
                1.0,
            );
            for (k, (seg, &s)) in segs.iter().zip(&seg_vars).enumerate() {
                row(
                    &mut m,
                    format!("seglo_{k}_{i}_{t}"),
                    vec![(h, 1.0), (s, -big_m_head)],
                    Sense::Ge,
                    seg.lo - big_m_head,
                );
                row(
                    &mut m,
                    format!("seghi_{k}_{i}_{t}"),
                    vec![(h, 1.0), (s, big_m_head)],
                    Sense::Le,
                    seg.hi + big_m_head,
                );
                let mq = piece_big_m(seg.flow, q_bar, bounds.lo, bounds.hi);
                row(
                    &mut m,
                    format!("qgenU_{k}_{i}_{t}"),
                    vec![(q_gen, 1.0), (h, -seg.flow.slope), (s, mq)],
                    Sense::Le,
                    seg.flow.intercept + mq,
                );
                row(
                    &mut m,
                    format!("qgenL_{k}_{i}_{t}"),
                    vec![(q_gen, 1.0), (h, -seg.flow.slope), (s, -mq)],
                    Sense::Ge,
                    seg.flow.intercept - mq,
                );
                let mp = piece_big_m(seg.power, p_bar, bounds.lo, bounds.hi);
                row(
                    &mut m,
                    format!("powU_{k}_{i}_{t}"),
                    vec![(p_turb, 1.0), (h, -seg.power.slope), (s, mp)],
                    Sense::Le,
                    seg.power.intercept + mp,
                );
                row(
                    &mut m,
                    format!("powL_{k}_{i}_{t}"),
                    vec![(p_turb, 1.0), (h, -seg.power.slope), (s, -mp)],
                    Sense::Ge,
                    seg.power.intercept - mp,
                );
            }

            // z = δ·Q for the generating flow.
            row(
                &mut m,
                format!("zq_on_{i}_{t}"),
                vec![(z_gen, 1.0), (d_gen, -q_bar)],
                Sense::Le,
                0.0,
            );
            row(
                &mut m,
                format!("zq_le_{i}_{t}"),
                vec![(z_gen, 1.0), (q_gen, -1.0)],
                Sense::Le,
                0.0,
            );
            row(
                &mut m,
                format!("zq_ge_{i}_{t}"),
                vec![(z_gen, 1.0), (q_gen, -1.0), (d_gen, -q_bar)],
                Sense::Ge,
                -q_bar,
            );
            row(
                &mut m,
                format!("zq_nn_{i}_{t}"),
                vec![(z_gen, 1.0)],
                Sense::Ge,
                0.0,
            );

            // Same pattern for δ·P.
            row(
                &mut m,
                format!("zp_on_{i}_{t}"),
                vec![(z_pow, 1.0), (d_gen, -p_bar)],
                Sense::Le,
                0.0,
            );
            row(
                &mut m,
                format!("zp_le_{i}_{t}"),
                vec![(z_pow, 1.0), (p_turb, -1.0)],
                Sense::Le,
                0.0,
            );
            row(
                &mut m,
                format!("zp_ge_{i}_{t}"),
                vec![(z_pow, 1.0), (p_turb, -1.0), (d_gen, -p_bar)],
                Sense::Ge,
                -p_bar,
            );
            row(
                &mut m,
                format!("zp_nn_{i}_{t}"),
                vec![(z_pow, 1.0)],
                Sense::Ge,
                0.0,
            );

            row(
                &mut m,
                format!("excl_{i}_{t}"),
                vec![(d_fill, 1.0), (d_gen, 1.0)],
                Sense::Le,
                1.0,
            );
            total_terms.push((z_gen, -1.0));
            power_terms.push((z_pow, -1.0));
        }

        row(&mut m, format!("fillsum_{t}"), fill_terms, Sense::Eq, 0.0);
        // z = δ·Q for the signed fill flow.
        row(
            &mut m,
            format!("fillA_{t}"),
            vec![(z_fill, 1.0), (d_fill, -fill_hi)],
            Sense::Le,
            0.0,
        );
        row(
            &mut m,
            format!("fillB_{t}"),
            vec![(z_fill, 1.0), (d_fill, -fill_lo)],
            Sense::Ge,
            0.0,
        );
        row(
            &mut m,
            format!("fillC_{t}"),
            vec![(z_fill, 1.0), (q_fill, -1.0), (d_fill, -fill_lo)],
            Sense::Le,
            -fill_lo,
        );
        row(
            &mut m,
            format!("fillD_{t}"),
            vec![(z_fill, 1.0), (q_fill, -1.0), (d_fill, -fill_hi)],
            Sense::Ge,
            -fill_hi,
        );
        row(&mut m, format!("total_{t}"), total_terms, Sense::Eq, 0.0);
        row(&mut m, format!("power_{t}"), power_terms, Sense::Eq, 0.0);
        row(
            &mut m,
            format!("energy_{t}"),
            vec![(e, 1.0), (power, -config.dt_hours())],
            Sense::Eq,
            0.0,
        );
    }

    m.objective = energy
        .iter()
        .enumerate()
        .map(|(t, &e)| (e, objective.weight(prices, t)))
        .collect();
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Timestamp;

    fn instance(steps: usize, n_turbines: u32) -> (LagoonConfig, TideSeries, PriceSeries) {
        let cfg = LagoonConfig {
            n_turbines,
            ..LagoonConfig::swansea()
        };
        let levels = (0..=steps).map(|k| (k as f64 * 0.7).sin()).collect();
        let tide = TideSeries::new(Timestamp::default(), 1800.0, levels).unwrap();
        let prices = PriceSeries::new(
            Timestamp::default(),
            1800.0,
            (0..steps).map(|k| 40.0 + 10.0 * k as f64).collect(),
        )
        .unwrap();
        (cfg, tide, prices)
    }

    #[test]
    fn flow_bound_covers_the_hill_chart() {
        assert_eq!(gen_flow_bound(HillChart::standard()), 450.0);
    }

    #[test]
    fn two_step_census() {
        // Per step: dF, QS, QFILL, zF, Q, P, E plus per turbine QTF, dG, 4 seg,
        // QTG, PT, zTG, zP; zin and H at 3 instants.
        //   variables = 2·3 + 2·(7 + 10) = 40, binaries = 2·(1 + 5) = 12.
        // Rows: init + 3 head rows, then per step balance, sluice, fillsum, 4 fill
        // aux, total, power, energy and per turbine tfill, segsum, 4·(2 interval +
        // 2 flow + 2 power), 4 flow aux, 4 power aux, excl: 4 + 2·(10 + 35) = 94.
        let (cfg, tide, prices) = instance(2, 1);
        let m = build_milp(&cfg, &tide, &prices, Objective::MaxEnergy).unwrap();
        assert_eq!(m.variables.len(), 40);
        assert_eq!(m.binary_count(), 12);
        assert_eq!(m.constraints.len(), 94);
        assert_eq!(m.metadata.steps, 2);
        assert_eq!(m.metadata.turbines, 1);
    }

    #[test]
    fn rows_reference_declared_variables_and_names_are_unique() {
        let (cfg, tide, prices) = instance(3, 2);
        let m = build_milp(&cfg, &tide, &prices, Objective::MaxRevenue).unwrap();
        let n = m.variables.len();
        assert!(m
            .constraints
            .iter()
            .all(|c| c.terms.iter().all(|(v, _)| v.0 < n)));
        let names: std::collections::BTreeSet<_> = m.variables.iter().map(|v| &v.name).collect();
        assert_eq!(names.len(), n);
        for (j, v) in m.variables.iter().enumerate() {
            let key = m.metadata.key(VarId(j));
            assert_eq!(key.to_string(), v.name);
            assert_eq!(m.var(key), Some(VarId(j)));
            if v.kind == VarKind::Binary {
                assert_eq!((v.lower, v.upper), (0.0, 1.0));
            }
        }
        let rows: std::collections::BTreeSet<_> = m.constraints.iter().map(|c| &c.name).collect();
        assert_eq!(rows.len(), m.constraints.len());
    }

    #[test]
    fn revenue_objective_is_price_times_energy_objective() {
        let (cfg, tide, _) = instance(4, 2);
        let flat = PriceSeries::flat(&tide, 73.5);
        let energy = build_milp(&cfg, &tide, &flat, Objective::MaxEnergy).unwrap();
        let revenue = build_milp(&cfg, &tide, &flat, Objective::MaxRevenue).unwrap();
        assert_eq!(energy.objective.len(), revenue.objective.len());
        for (&(ve, ce), &(vr, cr)) in energy.objective.iter().zip(&revenue.objective) {
            assert_eq!(ve, vr);
            assert_eq!(cr, 73.5 * ce);
        }
    }

    #[test]
    fn segments_cover_the_head_range() {
        let cfg = LagoonConfig::swansea();
        let segs = segments(&cfg, HillChart::standard());
        let ends: Vec<(f64, f64)> = segs.iter().map(|s| (s.lo, s.hi)).collect();
        assert_eq!(ends, vec![(-2.0, 1.0), (1.0, 3.9), (3.9, 7.0), (7.0, 8.0)]);
    }
}
