use super::*;
use crate::env_orbit::OrbitConfig;

fn quiet_plant() -> PlantConfig {
    PlantConfig {
        measurement_noise_sigma: MeasurementNoise::ZERO,
        ..PlantConfig::default()
    }
}

const DT: f64 = 30.0;

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

#[test]
fn eclipse_load_follows_battery_voltage() {
    let plant = quiet_plant();
    let trace = simulate_trace(&OrbitConfig::default(), &plant, FaultKind::Healthy, 400, DT).unwrap();
    let mut seen = 0;
    for r in trace.iter().filter(|r| r.sample.env.irradiance_w_m2 == 0.0) {
        let soc = r.sample.soc_true;
        if soc > 0.0 {
            assert!((r.sample.i_load_a - plant.ocv(soc) / plant.load_resistance_ohm).abs() < 1e-12);
            seen += 1;
        }
    }
    assert!(seen > 50);
}

#[test]
fn ground_leak_never_raises_soc() {
    let orbit = OrbitConfig::default();
    let plant = PlantConfig::default();
    let h = simulate(&orbit, &plant, FaultKind::Healthy, 3000, DT).unwrap();
    let g = simulate(&orbit, &plant, FaultKind::BatteryGround, 3000, DT).unwrap();
    for (a, b) in h.iter().zip(&g) {
        assert!(b.soc_true <= a.soc_true);
    }
    assert!(g.last().unwrap().soc_true < h.last().unwrap().soc_true);
}

#[test]
fn soc_matches_reaccumulated_currents() {
    let orbit = OrbitConfig::default();
    for fault in FaultKind::ALL {
        let plant = PlantConfig::default();
        let trace = simulate_trace(&orbit, &plant, fault, 2500, DT).unwrap();
        // independent re-accumulation from the logged currents
        let mut soc = plant.soc_init;
        for r in &trace {
            assert!((r.sample.soc_true - soc).abs() <= 1e-12, "{fault}");
            soc += r.i_batt_applied_a * DT / (3600.0 * plant.battery_capacity_ah);
        }
    }
}

#[test]
fn unclamped_steps_integrate_the_requested_current() {
    let (s, i) = advance_soc(0.5, 0.1, 0.5, 30.0);
    assert_eq!(i, 0.1);
    assert!((s - (0.5 + 0.1 * 30.0 / 1800.0)).abs() < 1e-15);
    let (s, i) = advance_soc(0.999, 5.0, 0.5, 30.0);
    assert_eq!(s, 1.0);
    assert!((i - 0.001 * 1800.0 / 30.0).abs() < 1e-9);
}

#[test]
fn full_length_run_has_2001_rows() {
    let rows = simulate(&OrbitConfig::default(), &PlantConfig::default(), FaultKind::Healthy, 2001, DT).unwrap();
    assert_eq!(rows.len(), 2001);
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.soc_true)));
    assert!(rows.iter().all(|r| r.v_pv_v >= 0.0 && r.i_pv_a >= 0.0 && r.i_load_a >= 0.0));
}

#[test]
fn identical_seeds_give_identical_csv() {
    let orbit = OrbitConfig::default();
    let plant = quiet_plant();
    let mut a = Vec::new();
    let mut b = Vec::new();
    write_telemetry_csv(&mut a, &simulate(&orbit, &plant, FaultKind::Healthy, 500, DT).unwrap()).unwrap();
    write_telemetry_csv(&mut b, &simulate(&orbit, &plant, FaultKind::Healthy, 500, DT).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn mppt_open_lowers_mean_load_current() {
    let orbit = OrbitConfig::default();
    let plant = PlantConfig::default();
    let h = simulate(&orbit, &plant, FaultKind::Healthy, 2000, DT).unwrap();
    let f = simulate(&orbit, &plant, FaultKind::MpptIgbtOpen, 2000, DT).unwrap();
    assert!(mean(f.iter().map(|s| s.i_load_a)) < mean(h.iter().map(|s| s.i_load_a)));
}

#[test]
fn faults_do_not_deliver_more_load_power() {
    // A shorted regulator pins the bus to the array voltage and so drives the
    // load harder than a healthy system; it is excluded on purpose.
    let orbit = OrbitConfig::default();
    let plant = quiet_plant();
    let avg = |fault| {
        let t = simulate_trace(&orbit, &plant, fault, 2500, DT).unwrap();
        mean(t.iter().map(|r| r.state.load_power_w()))
    };
    let healthy = avg(FaultKind::Healthy);
    for fault in FaultKind::ALL {
        if fault == FaultKind::RegIgbtShort {
            assert!(avg(fault) > healthy);
        } else {
            assert!(avg(fault) <= healthy + 1e-12, "{fault}");
        }
    }
}

#[test]
fn regulator_open_starves_the_eclipse_bus() {
    let plant = quiet_plant();
    let env = EnvSample {
        t_s: 0.0,
        irradiance_w_m2: 0.0,
        panel_temp_c: -20.0,
    };
    let s = plant_state(0.5, &env, &plant, FaultKind::RegIgbtOpen);
    let expected = plant.igbt_open_residual_gain.sqrt() * plant.ocv(0.5);
    assert!((s.v_bus_v - expected).abs() < 1e-12);
    // and differs from the MPPT-side open fault, which only acts on array power
    let m = plant_state(0.5, &env, &plant, FaultKind::MpptIgbtOpen);
    assert!((m.v_bus_v - plant.ocv(0.5)).abs() < 1e-12);
}

#[test]
fn step_chain_matches_simulate() {
    let orbit = OrbitConfig::default();
    let plant = quiet_plant();
    let rows = simulate(&orbit, &plant, FaultKind::BatteryGround, 300, DT).unwrap();
    let mut rng = crate::seed::rng(0);
    let mut prev = rows[0];
    for want in &rows[1..] {
        let got = step(&prev, &want.env, &plant, FaultKind::BatteryGround, DT, &mut rng);
        assert_eq!(&got, want);
        prev = got;
    }
}

#[test]
fn csv_round_trip_and_line_numbered_errors() {
    let rows = simulate(&OrbitConfig::default(), &PlantConfig::default(), FaultKind::PvLineLine, 50, DT).unwrap();
    let mut buf = Vec::new();
    write_telemetry_csv(&mut buf, &rows).unwrap();
    let back = read_telemetry_csv(&buf[..], Path::new("t.csv")).unwrap();
    assert_eq!(back, rows);

    let mut text = String::from_utf8(buf).unwrap();
    text.push_str("1,2,3,4,x,6,0.5,Healthy\n");
    let err = read_telemetry_csv(text.as_bytes(), Path::new("t.csv")).unwrap_err();
    assert!(err.to_string().starts_with("t.csv:52:"), "{err}");
}

#[test]
fn validation_names_the_field() {
    let bad = PlantConfig {
        lineline_shorted_cells: 12,
        ..PlantConfig::default()
    };
    assert!(bad.validate().unwrap_err().to_string().contains("lineline_shorted_cells"));
    let bad = PlantConfig {
        igbt_open_residual_gain: 1.0,
        ..PlantConfig::default()
    };
    assert!(bad.validate().unwrap_err().to_string().contains("igbt_open_residual_gain"));
    let bad = PlantConfig {
        beta_v_per_c: 0.1,
        ..PlantConfig::default()
    };
    assert!(bad.validate().unwrap_err().to_string().contains("beta_v_per_c"));
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn mpp_is_grid_optimal(g in 1.0f64..1500.0, t in -40.0f64..90.0) {
            let cfg = PlantConfig::default();
            let env = EnvSample { t_s: 0.0, irradiance_w_m2: g, panel_temp_c: t };
            let (v, i) = pv_operating_point(&env, &cfg, FaultKind::Healthy);
            let (isc, voc) = pv::string_params(&env, &cfg);
            let best = (0..10_001)
                .map(|k| {
                    let v = voc * k as f64 / 10_000.0;
                    v * pv::array_current(v, isc, voc, &cfg, FaultKind::Healthy)
                })
                .fold(0.0, f64::max);
            prop_assert!(v * i >= best * (1.0 - 1e-6));
        }

        #[test]
        fn state_is_physical(soc in 0.0f64..=1.0, g in 0.0f64..1500.0, t in -30.0f64..70.0, f in 0usize..7) {
            let cfg = PlantConfig::default();
            let env = EnvSample { t_s: 0.0, irradiance_w_m2: g, panel_temp_c: t };
            let s = plant_state(soc, &env, &cfg, FaultKind::ALL[f]);
            prop_assert!(s.v_pv_v >= 0.0 && s.i_pv_a >= 0.0 && s.i_load_a >= 0.0);
            prop_assert!(s.i_batt_a.is_finite());
        }
    }
}
