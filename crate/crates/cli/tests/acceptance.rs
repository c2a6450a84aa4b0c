//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use qvhs::amodel::{canonical_frame, connection_residuals, flat_frame, frame_monodromy, residue, verify_frame_lemmas};
use qvhs::catalog;
use qvhs::correspondence::{gamma1_from_potential, integrability_check, reconstruct_gamma, round_trip};
use qvhs::frobenius::{classical_potential, structure_constants_from_cubic, validate_module};
use qvhs::hodge::{
    degree_filtration, module_to_orbit, orbit_to_module, weight_filtration, ConeSampling, SignCalibration,
};
use qvhs::matrix::{mat_from_entries, MatSeries};
use qvhs::amodel::curvature_check;
use qvhs::potential::{wdvv_check, QuadrupleWitness, QuantumPotential};
use qvhs::{FrobeniusModule, QSeries, Scalar};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_modules() -> Vec<(String, FrobeniusModule)> {
    let mut out = Vec::new();
    for k in 3..=5 {
        for seed in 0..3 {
            out.push((format!("random k={} seed={}", k, seed), catalog::random_polarizable(k, seed)));
        }
    }
    out
}

fn q1(order: u32) -> QSeries {
    QSeries::q(1, order, 1)
}

fn e1_potentials(order: u32) -> Vec<(String, QuantumPotential)> {
    let s2 = QSeries::from_terms(
        1,
        order,
        vec![(vec![1], Scalar::from_int(3)), (vec![2], Scalar::from_int(7))],
    );
    vec![
        ("q1".into(), catalog::e1_potential(q1(order))),
        ("3q1+7q1^2".into(), catalog::e1_potential(s2)),
        ("seeded".into(), catalog::e1_potential(catalog::e1_random_series(0, order))),
    ]
}

fn classical_round_trip() -> Outcome {
    let mut modules = vec![("E1".to_string(), catalog::e1(5))];
    modules.extend(random_modules());
    for (name, m) in &modules {
        ensure(validate_module(m).passed(), || format!("{} is not a valid module", name))?;
        let cubic = classical_potential(m).map_err(|e| e.to_string())?;
        let products = structure_constants_from_cubic(m, &cubic).map_err(|e| e.to_string())?;
        ensure(products == m.products(), || format!("{}: structure constants differ", name))?;
    }
    Ok(format!("{} modules", modules.len()))
}

fn orbit_equivalence() -> Outcome {
    let sampling = ConeSampling::default();
    let cal = SignCalibration::Geometric;
    let mut modules = vec![("E1".to_string(), catalog::e1(5))];
    modules.extend(random_modules());
    for (name, m) in &modules {
        let orbit = module_to_orbit(m, &sampling, cal).map_err(|e| format!("{}: {}", name, e))?;
        let (back, _) = orbit_to_module(&orbit).map_err(|e| format!("{}: {}", name, e))?;
        ensure(&back == m, || format!("{}: orbit does not return the module", name))?;
    }
    match module_to_orbit(&catalog::e1(-5), &sampling, cal) {
        Err(qvhs::Error::NotPolarizable(w)) if w.contains("positivity") => {}
        other => return Err(format!("kappa = -5 not rejected with a positivity witness: {:?}", other.err())),
    }
    Ok(format!("{} modules, kappa = -5 rejected", modules.len()))
}

fn lefschetz_filtration() -> Outcome {
    let mut modules = vec![("E1".to_string(), catalog::e1(5))];
    modules.extend(random_modules());
    for (name, m) in &modules {
        let k = m.k() as i32;
        let bary = vec![Scalar::one(); m.r()];
        let w = weight_filtration(&m.product_by(&bary)).map_err(|e| e.to_string())?;
        ensure(w.shift(-k) == degree_filtration(m), || format!("{}: W[-k] differs from the degree filtration", name))?;
        let sampling = ConeSampling { seed: 0, samples: 5 };
        for lambda in sampling.points(m.r()) {
            let wl = weight_filtration(&m.product_by(&lambda)).map_err(|e| e.to_string())?;
            ensure(wl == w, || format!("{}: W depends on lambda", name))?;
        }
    }
    Ok(format!("{} modules", modules.len()))
}

fn triple_equivalence() -> Outcome {
    // First failure of the fixed perturbation, from a brute-force expansion
    // of all third partials.
    let frozen = QuadrupleWitness {
        j: 1,
        l: 2,
        a: 1,
        d: 5,
        monomial: vec![1, 0],
        value: Scalar::from_int(2) * Scalar::tau(),
    };
    let family = catalog::k5_family(0, 3);
    let mut violating = 0;
    for (name, phi) in &family {
        let wdvv = wdvv_check(phi).map_err(|e| e.to_string())?;
        let g1 = gamma1_from_potential(phi).map_err(|e| e.to_string())?;
        let integ = integrability_check(phi.module(), &g1).map_err(|e| e.to_string())?;
        let curv = curvature_check(phi).map_err(|e| e.to_string())?;
        ensure(wdvv == integ && integ == curv, || format!("{}: verdicts differ", name))?;
        if !wdvv.holds() {
            violating += 1;
        }
        if name == "perturbed" {
            ensure(wdvv.first() == Some(&frozen), || format!("perturbed witness {:?}", wdvv.first()))?;
        }
    }
    ensure(violating >= 1, || "no violating member".into())?;
    Ok(format!("{} potentials, {} violating", family.len(), violating))
}

fn correspondence_round_trip() -> Outcome {
    let mut cases: Vec<(String, QuantumPotential, u32)> =
        e1_potentials(8).into_iter().map(|(n, p)| (format!("E1/{}", n), p, 8)).collect();
    cases.push(("P1xP4".into(), catalog::p1p4_potential(), 4));
    for (name, phi, order) in &cases {
        let rt = round_trip(phi, *order).map_err(|e| format!("{}: {}", name, e))?;
        ensure(rt.passed(), || format!("{}: {}", name, rt.to_certificate()))?;
        ensure(rt.recovered.phi_a() == phi.phi_a(), || format!("{}: phi_a differs", name))?;
        ensure(
            rt.recovered.weight3_series() == phi.weight3_series(),
            || format!("{}: weight-3 series differs", name),
        )?;
    }
    Ok(format!("{} potentials", cases.len()))
}

/// Γ on E1 with φ_ħ = q₁ at order 1, by hand. T₁*T₁ gains τ³q₁T₂ and
/// D₁q₁ = τq₁, so Γ₋₁ = τ²q₁E₂₁. At order 1, G = 1 + Γ and
/// D₁G₋ℓ = [G₋ℓ₊₁, N₁] with N₁ = E₁₀ + 5E₂₁ + E₃₂ gives
/// G₋₂ = τq₁(E₂₀ − E₃₁) and G₋₃ = −2q₁E₃₀.
fn worked_tower() -> Outcome {
    let m = catalog::e1(5);
    let phi = catalog::e1_potential(q1(1));
    let entries = |cells: Vec<(usize, usize, Scalar)>| -> MatSeries {
        mat_from_entries(4, 1, 1, |i, j| {
            cells
                .iter()
                .find(|(a, b, _)| (*a, *b) == (i, j))
                .map(|(_, _, c)| q1(1).scale(c))
                .unwrap_or_else(|| QSeries::zero(1, 1))
        })
    };
    let tau = Scalar::tau();
    let expected = vec![
        entries(vec![(2, 1, Scalar::tau_pow(2))]),
        entries(vec![(2, 0, tau.clone()), (3, 1, -tau.clone())]),
        entries(vec![(3, 0, Scalar::from_int(-2))]),
    ];
    let g1 = gamma1_from_potential(&phi).map_err(|e| e.to_string())?;
    let tower = reconstruct_gamma(&m, &g1, 1).map_err(|e| e.to_string())?;
    ensure(tower.levels() == expected.as_slice(), || format!("tower:\n{}", tower))?;
    Ok("4 entries".into())
}

fn amodel_frames() -> Outcome {
    let mut cases: Vec<(String, QuantumPotential, u32)> =
        e1_potentials(8).into_iter().map(|(n, p)| (format!("E1/{}", n), p, 8)).collect();
    cases.push(("P1xP4".into(), catalog::p1p4_potential(), 4));
    for (name, phi, order) in &cases {
        let flat = flat_frame(phi, *order).map_err(|e| format!("{}: {}", name, e))?;
        let residuals = connection_residuals(phi, &flat).map_err(|e| e.to_string())?;
        ensure(residuals.iter().all(|r| r.is_zero()), || format!("{}: flat frame not flat", name))?;
        let canonical = canonical_frame(phi, *order).map_err(|e| e.to_string())?;
        let g1 = gamma1_from_potential(phi).map_err(|e| e.to_string())?;
        let tower = reconstruct_gamma(phi.module(), &g1, *order).map_err(|e| e.to_string())?;
        ensure(canonical.y == tower.exp_neg(), || format!("{}: canonical frame is not exp(-gamma)", name))?;
        let lemmas = verify_frame_lemmas(phi, *order).map_err(|e| e.to_string())?;
        ensure(lemmas.passed(), || format!("{}: {}", name, lemmas))?;
    }

    let phi = catalog::e1_potential(q1(1));
    let canonical = canonical_frame(&phi, 1).map_err(|e| e.to_string())?;
    let tau = Scalar::tau();
    let q = q1(1);
    let one = QSeries::constant(1, 1, Scalar::one());
    let zero = QSeries::zero(1, 1);
    let t0 = vec![one.clone(), zero.clone(), q.scale(&-tau.clone()), q.scale(&Scalar::from_int(2))];
    let t1 = vec![zero, one, q.scale(&-Scalar::tau_pow(2)), q.scale(&tau)];
    ensure(canonical.column(0) == t0, || format!("canonical T0: {:?}", canonical.column(0)))?;
    ensure(canonical.column(1) == t1, || format!("canonical T1: {:?}", canonical.column(1)))?;
    Ok(format!("{} potentials", cases.len()))
}

fn monodromy_residue() -> Outcome {
    let mut cases: Vec<(String, QuantumPotential)> =
        e1_potentials(6).into_iter().map(|(n, p)| (format!("E1/{}", n), p)).collect();
    cases.push(("P1xP4".into(), catalog::p1p4_potential()));
    for (name, m) in random_modules() {
        cases.push((name, QuantumPotential::classical(m, 3).map_err(|e| e.to_string())?));
    }
    let inv_tau = Scalar::tau_pow(-1);
    for (name, phi) in &cases {
        let m = phi.module();
        let flat = flat_frame(phi, phi.order()).map_err(|e| format!("{}: {}", name, e))?;
        for j in 1..=m.r() {
            let l = m.product(j).map_err(|e| e.to_string())?;
            let res = residue(phi, j).map_err(|e| e.to_string())?;
            ensure(res == l.scale(&inv_tau), || format!("{}: residue({}) differs", name, j))?;
            let (_, on_canonical) = frame_monodromy(&flat, j).map_err(|e| e.to_string())?;
            ensure(&on_canonical == l, || format!("{}: N_{} on the canonical frame differs", name, j))?;
        }
    }
    Ok(format!("{} potentials", cases.len()))
}

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "core", "data", name].iter().collect();
    p.display().to_string()
}

fn full_certificate() -> Outcome {
    let args = ["check-pvhs", &data("e1.module.json"), &data("e1q.potential.json"), "--order", "8"];
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_qvhs"))
            .args(args)
            .output()
            .map_err(|e| e.to_string())
    };
    let first = run()?;
    let second = run()?;
    ensure(first.status.code() == Some(0), || format!("exit {:?}", first.status.code()))?;
    ensure(first.stdout == second.stdout, || "reports differ between runs".into())?;
    let report: serde_json::Value = serde_json::from_slice(&first.stdout).map_err(|e| e.to_string())?;
    let checks = report["checks"].as_array().ok_or("no checks")?;
    for name in [
        "pvhs.pairing-flat",
        "pvhs.transversality",
        "pvhs.real-frame-flat",
        "pvhs.real-monodromy",
        "pvhs.real-polarization",
        "pvhs.frame-agreement",
    ] {
        let item = checks.iter().find(|c| c["name"] == name).ok_or(format!("{} missing", name))?;
        ensure(item["passed"] == true, || format!("{} failed", name))?;
    }
    Ok(format!("{} checks, byte-stable", checks.len()))
}

fn main() {
    let criteria: Vec<(&str, u64, fn() -> Outcome)> = vec![
        ("classical round trip", 1, classical_round_trip),
        ("module-orbit equivalence", 1, orbit_equivalence),
        ("hard Lefschetz filtration", 5, lefschetz_filtration),
        ("triple equivalence of integrability", 30, triple_equivalence),
        ("correspondence round trip", 60, correspondence_round_trip),
        ("worked gamma tower", 1, worked_tower),
        ("A-model frames", 60, amodel_frames),
        ("monodromy and residue", 5, monodromy_residue),
        ("full certificate", 60, full_certificate),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(note) if elapsed > Duration::from_secs(*budget) => {
                Err(format!("{} but took {:.2?} (budget {} s)", note, elapsed, budget))
            }
            other => other,
        };
        match outcome {
            Ok(note) => println!("PASS {} {}: {} ({:.2?})", i + 1, name, note, elapsed),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {}: {} ({:.2?})", i + 1, name, why, elapsed);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
