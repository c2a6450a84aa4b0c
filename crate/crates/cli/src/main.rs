mod report;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qvhs::amodel::{
    canonical_frame, connection_residuals, flat_frame, frame_monodromy, monodromy, pvhs_certificate, residue,
    verify_frame_lemmas,
};
use qvhs::correspondence::{
    canonical_check, gamma1_from_potential, integrability_check, potential_from_gamma, q_preservation,
    reconstruct_gamma, round_trip, vector_string, GammaTower,
};
use qvhs::format::{ModuleFile, PotentialFile};
use qvhs::frobenius::{basis_name, classical_potential, structure_constants_from_cubic, validate_module};
use qvhs::hodge::{
    check_framing_cone, check_max_unipotent, module_to_orbit, orbit_to_module, weight_filtration, ConeSampling,
    SignCalibration,
};
use qvhs::potential::{quantum_product, validate_potential, wdvv_check, QuantumPotential};
use qvhs::report::Certificate;
use qvhs::{Error, FrobeniusModule, Matrix, Result, Scalar};

use report::Report;

#[derive(Parser)]
#[command(name = "qvhs", version, about = "Quantum potentials, Frobenius modules and their Hodge-theoretic data")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Truncation order; defaults to the order of the potential file.
    #[arg(long, global = true)]
    order: Option<u32>,

    /// Seed for cone sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    #[arg(long, global = true, default_value = "geometric")]
    sign_calibration: SignCalibration,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct Pair {
    module: PathBuf,
    potential: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Check the module axioms, and the potential if one is given.
    Validate { module: PathBuf, potential: Option<PathBuf> },
    /// The cubic potential of a module and the products it reproduces.
    ClassicalPotential { module: PathBuf },
    /// Graded WDVV equations up to the truncation order.
    WdvvCheck(Pair),
    /// T_j *_q T_a.
    QuantumProduct {
        #[command(flatten)]
        inputs: Pair,
        #[arg(long)]
        j: usize,
        #[arg(long)]
        a: usize,
    },
    /// The gauge tower of a potential.
    Correspond(Pair),
    /// Rebuild the tower and read the potential back off it.
    ExtractPotential(Pair),
    /// Potential to tower and back.
    RoundTrip(Pair),
    /// Flat frame of the A-model connection.
    FlatFrame(Pair),
    /// Single-valued canonical frame.
    CanonicalFrame(Pair),
    /// Residue of the connection at q_j = 0.
    Residue {
        #[command(flatten)]
        inputs: Pair,
        #[arg(long)]
        j: usize,
    },
    /// Monodromy around q_j = 0.
    Monodromy {
        #[command(flatten)]
        inputs: Pair,
        #[arg(long)]
        j: usize,
    },
    /// Full certificate for the variation defined by a potential.
    CheckPvhs(Pair),
    /// Module to nilpotent orbit and back, with maximal unipotency.
    CheckOrbit { module: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::ClassicalPotential { .. } => "classical-potential",
            Command::WdvvCheck(_) => "wdvv-check",
            Command::QuantumProduct { .. } => "quantum-product",
            Command::Correspond(_) => "correspond",
            Command::ExtractPotential(_) => "extract-potential",
            Command::RoundTrip(_) => "round-trip",
            Command::FlatFrame(_) => "flat-frame",
            Command::CanonicalFrame(_) => "canonical-frame",
            Command::Residue { .. } => "residue",
            Command::Monodromy { .. } => "monodromy",
            Command::CheckPvhs(_) => "check-pvhs",
            Command::CheckOrbit { .. } => "check-orbit",
        }
    }

    fn inputs(&self) -> Vec<&PathBuf> {
        match self {
            Command::Validate { module, potential } => std::iter::once(module).chain(potential.iter()).collect(),
            Command::ClassicalPotential { module } | Command::CheckOrbit { module } => vec![module],
            Command::QuantumProduct { inputs, .. } | Command::Residue { inputs, .. } | Command::Monodromy { inputs, .. } => {
                vec![&inputs.module, &inputs.potential]
            }
            Command::WdvvCheck(p)
            | Command::Correspond(p)
            | Command::ExtractPotential(p)
            | Command::RoundTrip(p)
            | Command::FlatFrame(p)
            | Command::CanonicalFrame(p)
            | Command::CheckPvhs(p) => vec![&p.module, &p.potential],
        }
    }
}

type Payload = BTreeMap<String, Value>;

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse {
        location: path.display().to_string(),
        message: e.to_string(),
    })
}

fn located(path: &PathBuf, e: Error) -> Error {
    match e {
        Error::Parse { location, message } => Error::Parse {
            location: format!("{}: {}", path.display(), location),
            message,
        },
        other => other,
    }
}

fn load_module(path: &PathBuf) -> Result<FrobeniusModule> {
    let text = read(path)?;
    ModuleFile::parse(&text)
        .and_then(|f| f.to_module())
        .map_err(|e| located(path, e))
}

fn load_potential(m: &FrobeniusModule, path: &PathBuf, order: Option<u32>) -> Result<QuantumPotential> {
    let text = read(path)?;
    let phi = PotentialFile::parse(&text)
        .and_then(|f| f.to_potential(m))
        .map_err(|e| located(path, e))?;
    Ok(match order {
        Some(d) => phi.with_order(d),
        None => phi,
    })
}

fn load_pair(p: &Pair, order: Option<u32>) -> Result<QuantumPotential> {
    let m = load_module(&p.module)?;
    load_potential(&m, &p.potential, order)
}

fn matrix_rows(m: &Matrix) -> Value {
    let rows: Vec<String> = (0..m.rows())
        .map(|i| {
            let row: Vec<String> = (0..m.cols()).map(|j| m.get(i, j).to_string()).collect();
            format!("[{}]", row.join(", "))
        })
        .collect();
    json!(rows)
}

fn tower_payload(tower: &GammaTower) -> Value {
    json!(tower.lines())
}

/// Run a step whose mathematical failure should be reported as a failed check.
fn step<T>(cert: &mut Certificate, name: &str, r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.is_input_error() => Err(e),
        Err(e) => {
            cert.fail(name, e.to_string());
            Ok(None)
        }
    }
}

fn tower_for(phi: &QuantumPotential, order: u32, cert: &mut Certificate) -> Result<Option<GammaTower>> {
    let m = phi.module();
    let gamma1 = gamma1_from_potential(phi)?;
    let verdict = integrability_check(m, &gamma1)?;
    cert.items.extend(verdict.to_certificate("integrable").items);
    if !verdict.holds() {
        return Ok(None);
    }
    step(cert, "reconstruct", reconstruct_gamma(m, &gamma1, order))
}

fn run(cli: &Cli) -> Result<(Certificate, Payload)> {
    let mut cert = Certificate::new();
    let mut payload = Payload::new();
    let sampling = ConeSampling {
        seed: cli.seed,
        ..ConeSampling::default()
    };
    match &cli.command {
        Command::Validate { module, potential } => {
            let m = load_module(module)?;
            cert.extend("module", validate_module(&m));
            if let Some(p) = potential {
                let phi = load_potential(&m, p, cli.order)?;
                cert.extend("potential", validate_potential(&phi));
            }
        }
        Command::ClassicalPotential { module } => {
            let m = load_module(module)?;
            let cubic = classical_potential(&m)?;
            let products = structure_constants_from_cubic(&m, &cubic)?;
            let mismatch = products
                .iter()
                .zip(m.products())
                .position(|(x, y)| x != y)
                .map(|j| format!("product by {} differs", basis_name(j + 1)));
            cert.record("reproduces-products", mismatch);
            payload.insert("cubic".into(), json!(cubic.to_string()));
        }
        Command::WdvvCheck(p) => {
            let phi = load_pair(p, cli.order)?;
            let verdict = wdvv_check(&phi)?;
            cert = verdict.to_certificate("wdvv");
            let witnesses: Vec<String> = verdict.violations.iter().map(|w| w.to_string()).collect();
            if !witnesses.is_empty() {
                payload.insert("violations".into(), json!(witnesses));
            }
        }
        Command::QuantumProduct { inputs, j, a } => {
            let phi = load_pair(inputs, cli.order)?;
            let v = quantum_product(&phi, *j, *a)?;
            payload.insert(
                "product".into(),
                json!(format!("{} * {} = {}", basis_name(*j), basis_name(*a), vector_string(&v))),
            );
        }
        Command::Correspond(p) => {
            let phi = load_pair(p, cli.order)?;
            let order = phi.order();
            if let Some(tower) = tower_for(&phi, order, &mut cert)? {
                let m = phi.module();
                cert.record(
                    "canonical",
                    (!canonical_check(m, &tower)).then(|| "tower does not annihilate T0".to_string()),
                );
                cert.extend("q-preserved", q_preservation(m, &tower));
                payload.insert("gamma".into(), tower_payload(&tower));
            }
        }
        Command::ExtractPotential(p) => {
            let phi = load_pair(p, cli.order)?;
            let order = phi.order();
            if let Some(tower) = tower_for(&phi, order, &mut cert)? {
                if let Some(recovered) = step(&mut cert, "extract", potential_from_gamma(phi.module(), &tower))? {
                    cert.pass("extract");
                    let file = PotentialFile::from_potential(&recovered);
                    payload.insert("potential".into(), serde_json::to_value(file).expect("file serializes"));
                }
            }
        }
        Command::RoundTrip(p) => {
            let phi = load_pair(p, cli.order)?;
            if let Some(rt) = step(&mut cert, "round-trip", round_trip(&phi, phi.order()))? {
                cert = rt.to_certificate();
                payload.insert("gamma".into(), tower_payload(&rt.tower));
                let file = PotentialFile::from_potential(&rt.recovered);
                payload.insert("potential".into(), serde_json::to_value(file).expect("file serializes"));
            }
        }
        Command::FlatFrame(p) => {
            let phi = load_pair(p, cli.order)?;
            if let Some(frame) = step(&mut cert, "flat-frame", flat_frame(&phi, phi.order()))? {
                let residuals = connection_residuals(&phi, &frame)?;
                let bad = residuals
                    .iter()
                    .position(|r| !r.is_zero())
                    .map(|j| format!("nabla_{} of the frame is nonzero", j + 1));
                cert.record("flat", bad);
                payload.insert("frame".into(), json!(frame.lines()));
            }
        }
        Command::CanonicalFrame(p) => {
            let phi = load_pair(p, cli.order)?;
            let order = phi.order();
            if let Some(frame) = step(&mut cert, "canonical-frame", canonical_frame(&phi, order))? {
                let mut scratch = Certificate::new();
                if let Some(tower) = tower_for(&phi, order, &mut scratch)? {
                    cert.record(
                        "equals-exp-minus-gamma",
                        (frame.y != tower.exp_neg()).then(|| "canonical frame differs from exp(-gamma)".to_string()),
                    );
                } else {
                    cert.items.extend(scratch.items);
                }
                payload.insert("frame".into(), json!(frame.lines()));
            }
        }
        Command::Residue { inputs, j } => {
            let phi = load_pair(inputs, cli.order)?;
            let res = residue(&phi, *j)?;
            let expected = phi.module().product(*j)?.scale(&Scalar::tau_pow(-1));
            cert.record(
                "product-over-tau",
                (res != expected).then(|| format!("residue differs from tau^-1 L_{}", j)),
            );
            payload.insert("residue".into(), matrix_rows(&res));
        }
        Command::Monodromy { inputs, j } => {
            let phi = load_pair(inputs, cli.order)?;
            let m = phi.module();
            let mono = monodromy(m, *j)?;
            if let Some(flat) = step(&mut cert, "flat-frame", flat_frame(&phi, phi.order()))? {
                if let Some((from_frame, on_canonical)) = step(&mut cert, "continuation", frame_monodromy(&flat, *j))? {
                    cert.record(
                        "frame-continuation",
                        (from_frame != mono).then(|| "continuing the flat frame gives a different monodromy".to_string()),
                    );
                    cert.record(
                        "log-on-canonical",
                        (&on_canonical != m.product(*j)?)
                            .then(|| format!("log of monodromy on the canonical frame differs from L_{}", j)),
                    );
                    payload.insert("log_on_canonical".into(), matrix_rows(&on_canonical));
                }
            }
            payload.insert("monodromy".into(), matrix_rows(&mono.matrix));
            payload.insert("log".into(), matrix_rows(&mono.log));
        }
        Command::CheckPvhs(p) => {
            let phi = load_pair(p, cli.order)?;
            let m = phi.module();
            cert.extend("module", validate_module(m));
            cert.extend("potential", validate_potential(&phi));
            let verdict = wdvv_check(&phi)?;
            cert.items.extend(verdict.to_certificate("wdvv").items);
            if verdict.holds() {
                if let Some(c) = step(&mut cert, "pvhs", pvhs_certificate(&phi, phi.order()))? {
                    cert.extend("pvhs", c);
                }
                if let Some(c) = step(&mut cert, "frames", verify_frame_lemmas(&phi, phi.order()))? {
                    cert.extend("frames", c);
                }
            }
        }
        Command::CheckOrbit { module } => {
            let m = load_module(module)?;
            cert.extend("module", validate_module(&m));
            if !cert.passed() {
                return Ok((cert, payload));
            }
            cert.extend("cone", check_framing_cone(&m, &sampling, cli.sign_calibration)?);
            if let Some(orbit) = step(&mut cert, "orbit", module_to_orbit(&m, &sampling, cli.sign_calibration))? {
                cert.extend("unipotent", check_max_unipotent(&orbit));
                if let Some((back, basis)) = step(&mut cert, "inverse", orbit_to_module(&orbit))? {
                    cert.record(
                        "round-trip",
                        (back != m).then(|| "module rebuilt from the orbit differs".to_string()),
                    );
                    payload.insert("adapted_basis".into(), matrix_rows(&basis));
                }
                let w = weight_filtration(&orbit.barycenter())?.shift(-(orbit.k as i32));
                payload.insert("weight_filtration".into(), json!(w.describe()));
            }
        }
    }
    Ok((cert, payload))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut flags = BTreeMap::new();
    if let Some(d) = cli.order {
        flags.insert("order".to_string(), d.to_string());
    }
    flags.insert("seed".to_string(), cli.seed.to_string());
    match &cli.command {
        Command::QuantumProduct { j, a, .. } => {
            flags.insert("j".to_string(), j.to_string());
            flags.insert("a".to_string(), a.to_string());
        }
        Command::Residue { j, .. } | Command::Monodromy { j, .. } => {
            flags.insert("j".to_string(), j.to_string());
        }
        _ => {}
    }
    let calibration = serde_json::to_value(cli.sign_calibration).expect("calibration serializes");
    flags.insert(
        "sign-calibration".to_string(),
        calibration.as_str().unwrap_or_default().to_string(),
    );
    let inputs = cli.command.inputs().iter().map(|p| p.display().to_string()).collect();
    let report = Report::new(cli.command.name(), inputs, flags);
    let report = match run(&cli) {
        Ok((cert, payload)) => report.finish(cert, payload),
        Err(e) if e.is_input_error() => report.input_error(e.to_string()),
        Err(e) => {
            let mut cert = Certificate::new();
            cert.fail(cli.command.name(), e.to_string());
            report.finish(cert, Payload::new())
        }
    };
    let text = match cli.format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    };
    print!("{}", text);
    ExitCode::from(report.exit_code as u8)
}
