use lagoon_core::io::synth_tide;
use lagoon_core::milp::{
    build_milp, check_assignment, check_schedule, schedule_assignment, MilpModel, Symbol, VarKey,
};
use lagoon_core::physics::{turbine_gen_flow, turbine_power};
use lagoon_core::*;

const TOL: f64 = 1e-6;

fn one_turbine() -> LagoonConfig {
    LagoonConfig {
        n_turbines: 1,
        ..LagoonConfig::swansea()
    }
}

/// A hold step that opens a head `h`, then one generating step at that head
/// with the given per-turbine flow and power. Levels are chosen so every
/// other row holds.
fn generating_step(
    cfg: &LagoonConfig,
    h: f64,
    q: f64,
    p: f64,
) -> (TideSeries, PriceSeries, Schedule) {
    let z_end = -q * cfg.dt_s / cfg.surface_area_m2;
    let tide = TideSeries::new(Timestamp::default(), cfg.dt_s, vec![0.0, -h, z_end - h]).unwrap();
    let prices = PriceSeries::flat(&tide, 1.0);
    let e = p * cfg.dt_hours();
    let schedule = Schedule {
        modes: vec![Mode::Hold, Mode::Generate(1)],
        z_in_m: vec![0.0, 0.0, z_end],
        head_m: vec![0.0, h],
        q_total_m3s: vec![0.0, q],
        q_sluice_m3s: vec![0.0; 2],
        q_turbine_fill_m3s: vec![0.0; 2],
        q_turbine_gen_m3s: vec![0.0, q],
        power_mw: vec![0.0, p],
        energy_mwh: vec![0.0, e],
        revenue: vec![0.0, e],
    };
    (tide, prices, schedule)
}

fn feasible(cfg: &LagoonConfig, h: f64, q: f64, p: f64) -> bool {
    let (tide, prices, s) = generating_step(cfg, h, q, p);
    let model = build_milp(cfg, &tide, &prices, Objective::MaxEnergy).unwrap();
    check_schedule(&model, &s, TOL).unwrap().is_feasible()
}

#[test]
fn piecewise_encoding_reproduces_hill_chart() {
    let cfg = one_turbine();
    let breakpoints = [1.0, 3.9, 7.0];
    for j in 0..=800 {
        let h = j as f64 / 100.0;
        let (q, p) = (turbine_gen_flow(h).unwrap(), turbine_power(h).unwrap());
        assert!(feasible(&cfg, h, q, p), "physics values rejected at {h}");
        if breakpoints.contains(&h) {
            continue;
        }
        for d in [-1e-3, 1e-3] {
            assert!(!feasible(&cfg, h, q + d, p), "flow {d} off accepted at {h}");
            assert!(
                !feasible(&cfg, h, q, p + d),
                "power {d} off accepted at {h}"
            );
        }
    }
}

fn rows_hold(model: &MilpModel, values: &[f64], prefixes: &[&str]) -> bool {
    model
        .constraints
        .iter()
        .filter(|r| prefixes.iter().any(|p| r.name.starts_with(p)))
        .all(|r| r.violation(values) <= TOL)
}

#[test]
fn product_linearisation_forces_product() {
    let cfg = one_turbine();
    let (tide, prices, s) = generating_step(
        &cfg,
        5.0,
        turbine_gen_flow(5.0).unwrap(),
        turbine_power(5.0).unwrap(),
    );
    let model = build_milp(&cfg, &tide, &prices, Objective::MaxEnergy).unwrap();
    let base = schedule_assignment(&model, &s).unwrap();
    let id = |sym| model.var(VarKey::turbine(sym, 0, 1)).unwrap().0;
    let (d, q, z) = (
        id(Symbol::GenBinary),
        id(Symbol::GenFlow),
        id(Symbol::GenAux),
    );
    let (p, zp) = (id(Symbol::TurbinePower), id(Symbol::PowerAux));

    let flows = [0.0, 120.0, 411.65, 441.27, 450.0];
    let powers = [0.0, 6.66, 13.32, 20.0];
    for delta in [0.0, 1.0] {
        for &qv in &flows {
            for &zv in &flows {
                let mut v = base.clone();
                v[d] = delta;
                v[q] = qv;
                v[z] = zv;
                let expected = zv == delta * qv;
                assert_eq!(
                    rows_hold(&model, &v, &["zq_"]),
                    expected,
                    "delta {delta} q {qv} z {zv}"
                );
            }
        }
        for &pv in &powers {
            for &zv in &powers {
                let mut v = base.clone();
                v[d] = delta;
                v[p] = pv;
                v[zp] = zv;
                assert_eq!(
                    rows_hold(&model, &v, &["zp_"]),
                    zv == delta * pv,
                    "delta {delta} p {pv} z {zv}"
                );
            }
        }
    }
}

fn scenario(steps: usize, n_turbines: u32) -> (LagoonConfig, TideSeries, PriceSeries) {
    let cfg = LagoonConfig {
        n_turbines,
        ..LagoonConfig::swansea()
    };
    let tide = synth_tide(
        0.0,
        4.0,
        44_700.0,
        0.0,
        Timestamp::default(),
        cfg.dt_s,
        steps,
    )
    .unwrap();
    let prices = PriceSeries::new(
        tide.t0,
        cfg.dt_s,
        (0..steps)
            .map(|k| 40.0 + 30.0 * ((k as f64) / 4.0).sin())
            .collect(),
    )
    .unwrap();
    (cfg, tide, prices)
}

#[test]
fn dp_schedules_satisfy_every_row() {
    for (steps, n) in [(24, 4), (48, 16)] {
        let (cfg, tide, prices) = scenario(steps, n);
        for objective in [Objective::MaxEnergy, Objective::MaxRevenue] {
            let r = optimize(
                &cfg,
                &tide,
                &prices,
                objective,
                &DpParams::with_resolution(0.02),
            )
            .unwrap();
            let model = build_milp(&cfg, &tide, &prices, objective).unwrap();
            let report = check_schedule(&model, &r.schedule, TOL).unwrap();
            assert!(
                report.is_feasible(),
                "{:?}",
                &report.violations[..report.violations.len().min(5)]
            );
            let values = schedule_assignment(&model, &r.schedule).unwrap();
            let rel = (model.objective_value(&values) - r.objective_value).abs()
                / r.objective_value.abs();
            assert!(rel < 1e-12, "{rel}");
        }
    }
}

#[test]
fn corrupted_level_breaks_balance() {
    let (cfg, tide, prices) = scenario(24, 4);
    let r = optimize(
        &cfg,
        &tide,
        &prices,
        Objective::MaxEnergy,
        &DpParams::default(),
    )
    .unwrap();
    let model = build_milp(&cfg, &tide, &prices, Objective::MaxEnergy).unwrap();
    let mut s = r.schedule.clone();
    s.z_in_m[10] += 0.1;
    let report = check_schedule(&model, &s, TOL).unwrap();
    assert!(report.rows_at(9).any(|r| r == "balance_9"));
    assert!(report.rows_at(10).any(|r| r == "balance_10"));
}

#[test]
fn generation_below_start_head_is_flagged() {
    let cfg = one_turbine();
    let (tide, prices, s) = generating_step(&cfg, 0.5, 0.0, 1.0);
    let model = build_milp(&cfg, &tide, &prices, Objective::MaxEnergy).unwrap();
    let report = check_schedule(&model, &s, TOL).unwrap();
    assert!(report.rows_at(1).any(|r| r == "powU_0_0_1"), "{report:?}");
}

#[test]
fn raw_assignment_checks_integrality() {
    let cfg = one_turbine();
    let (tide, prices, s) = generating_step(
        &cfg,
        5.0,
        turbine_gen_flow(5.0).unwrap(),
        turbine_power(5.0).unwrap(),
    );
    let model = build_milp(&cfg, &tide, &prices, Objective::MaxEnergy).unwrap();
    let mut v = schedule_assignment(&model, &s).unwrap();
    assert!(check_assignment(&model, &v, TOL).is_feasible());
    v[model.var(VarKey::step(Symbol::FillBinary, 1)).unwrap().0] = 0.5;
    let report = check_assignment(&model, &v, TOL);
    assert!(report
        .violations
        .iter()
        .any(|x| x.row.starts_with("bound:dF")));
}
