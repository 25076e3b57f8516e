use geomflux_cli::config::validate_config;
use geomflux_cli::report::{config_hash, Cell, Table};
use proptest::prelude::*;
use serde_json::{json, Value};

fn coords(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, n)
}

fn family() -> impl Strategy<Value = (Value, usize, usize)> {
    let hbar = 0.1..3.0f64;
    prop_oneof![
        (hbar.clone(), prop::sample::select(vec![0.5, 1.0, 1.5, 2.0]))
            .prop_map(|(hbar, spin)| (json!({"kind": "spin", "spin": spin, "hbar": hbar}), 3, (2.0 * spin) as usize + 1)),
        (hbar.clone(), 0.01..1.0f64)
            .prop_map(|(hbar, delta)| (json!({"kind": "avoided-crossing", "delta": delta, "hbar": hbar}), 2, 2)),
        (hbar, 2..6usize, 1..4usize, 1..3u32, any::<u64>()).prop_map(|(hbar, dim, pd, degree, seed)| {
            (
                json!({"kind": "seeded-random-polynomial", "dim": dim, "param_dim": pd, "degree": degree, "seed": seed, "hbar": hbar}),
                pd,
                dim,
            )
        }),
    ]
}

fn descending(lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, 1..5).prop_map(|mut v| {
        v.sort_by(|a, b| b.total_cmp(a));
        v.dedup();
        v
    })
}

fn quantum_config() -> impl Strategy<Value = Value> {
    family().prop_flat_map(|(fam, pd, dim)| {
        (
            Just(fam),
            0..dim,
            coords(pd),
            coords(pd),
            coords(pd),
            prop::collection::vec(coords(pd), 1..4),
            prop::collection::vec(0.0..100.0f64, 1..20),
            descending(1e-3, 1.0),
            descending(1e-3, 1.0),
            any::<u64>(),
            2..1000usize,
            any::<bool>(),
        )
            .prop_map(|(fam, level, a, b, c, points, times, s, z, seed, samples, phase)| {
                if phase {
                    json!({
                        "task": "phase", "family": fam, "level": level,
                        "path": {"kind": "line", "from": a, "to": b, "samples": samples},
                        "seed": seed, "tolerances": {"phase": 1e-5},
                    })
                } else {
                    json!({
                        "task": "theorem", "family": fam, "level": level,
                        "points": points, "reference_point": c,
                        "times": times, "s_values": s, "z_values": z, "seed": seed,
                    })
                }
            })
    })
}

fn classical_config() -> impl Strategy<Value = Value> {
    (
        prop_oneof![
            (0.2..3.0f64, 0.2..3.0f64).prop_map(|(m, w)| json!({"kind": "harmonic", "mass": [m], "omega": [w]})),
            (0.01..1.0f64).prop_map(|beta| json!({"kind": "quartic-coupled", "beta": beta})),
        ],
        0.1..5.0f64,
        100..5000usize,
        1.0..300.0f64,
        0.01..0.5f64,
        any::<u64>(),
    )
        .prop_map(|(system, energy, samples, t_max, time_step, seed)| {
            let dof = if system["kind"] == "harmonic" { 1 } else { 2 };
            let ensemble = if dof == 1 && samples % 2 == 0 {
                json!({"kind": "torus", "actions": [energy]})
            } else {
                json!({"kind": "shell", "energy": energy})
            };
            json!({
                "task": "classical", "seed": seed,
                "classical": {
                    "system": system, "parameters": [0.5], "ensemble": ensemble,
                    "samples": samples, "t_max": t_max, "time_step": time_step,
                    "checks": {"theorem": true, "max_decay": 0.5},
                },
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn config_round_trips(doc in prop_oneof![quantum_config(), classical_config()]) {
        let first = validate_config(&doc.to_string()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let second = validate_config(&first.to_json()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(config_hash(&first), config_hash(&second));
        prop_assert_eq!(first, second);
    }

    #[test]
    fn csv_numbers_round_trip_bitwise(x in any::<f64>()) {
        let mut t = Table::new(&["x"]);
        t.push(vec![Cell::Num(x)]);
        let csv = t.to_csv();
        let cell = csv.lines().nth(1).unwrap();
        if x.is_finite() {
            prop_assert_eq!(cell.parse::<f64>().unwrap().to_bits(), x.to_bits());
        } else {
            prop_assert_eq!(cell, "");
        }
    }
}
