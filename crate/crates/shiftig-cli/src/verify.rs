//! Self-check battery behind `shiftig verify`: analytic-vs-numeric
//! gradients, completeness convergence sweeps, and edge-score identities.

use ndarray::Array2;

use shiftig::alignment::{alignment_scores, edge_scores};
use shiftig::attribution::{integrated_gradients, PathSpec, Scheme};
use shiftig::model::{fd_gradient, forward, gradient, Differentiable, DifferentiableModel};
use shiftig::signal::LeadTimeMatrix;
use shiftig::{fixtures, Error};

use crate::{load_model, CliResult, VerifyArgs};

const FD_STEP: f64 = 1e-5;
const FD_TOLERANCE: f64 = 1e-5;
const SWEEP_STEPS: [usize; 4] = [16, 64, 256, 1024];
const SWEEP_TOLERANCE: f64 = 1e-4;
const EDGE_TOLERANCE: f64 = 1e-9;

struct CheckRow {
    name: String,
    outcome: Result<String, String>,
}

fn check(name: impl Into<String>, outcome: Result<String, String>) -> CheckRow {
    CheckRow {
        name: name.into(),
        outcome,
    }
}

/// Max relative gradient error against the central-difference oracle,
/// skipping coordinates whose relu gates flip under the probe step.
fn fd_check(model: &DifferentiableModel, x: &LeadTimeMatrix) -> Result<f64, Error> {
    let g = gradient(model, x)?;
    let fd = fd_gradient(model, x, FD_STEP)?;
    let scale = g
        .data()
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(1e-12);
    let (c, t) = x.shape();
    let mut worst = 0.0_f64;
    let mut probe = x.data().to_owned();
    for i in 0..c {
        for j in 0..t {
            let original = probe[(i, j)];
            probe[(i, j)] = original + FD_STEP;
            let plus = model.relu_gates(&probe.view());
            probe[(i, j)] = original - FD_STEP;
            let minus = model.relu_gates(&probe.view());
            probe[(i, j)] = original;
            if plus != minus {
                continue; // kink coordinate
            }
            let err = (g.data()[(i, j)] - fd.data()[(i, j)]).abs() / scale;
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

fn fd_row(name: &str, model: &DifferentiableModel, seed: u64) -> CheckRow {
    let (c, t) = model.input_shape();
    let run = || -> Result<f64, Error> {
        let mut worst = 0.0_f64;
        for point in 0u64..3 {
            let x = fixtures::random_signal(c, t, 512.0, 0.02, 0.98, seed ^ (point + 1));
            worst = worst.max(fd_check(model, &x)?);
        }
        Ok(worst)
    };
    let outcome = match run() {
        Ok(worst) if worst <= FD_TOLERANCE => Ok(format!("max rel err {worst:.2e}")),
        Ok(worst) => Err(format!("max rel err {worst:.2e} > {FD_TOLERANCE:.0e}")),
        Err(e) => Err(e.code().to_string()),
    };
    check(format!("gradient-fd {name}"), outcome)
}

fn relative_residual(model: &DifferentiableModel, path: &PathSpec) -> Result<f64, Error> {
    let a = integrated_gradients(model, path)?;
    Ok(a.completeness_residual().abs()
        / f64::max(1.0, (a.f_target() - a.f_baseline()).abs()))
}

fn sweep_row(name: &str, model: &DifferentiableModel, seed: u64) -> CheckRow {
    let (c, t) = model.input_shape();
    let (target, baseline) = fixtures::random_pair(c, t, 512.0, seed);
    let run = || -> Result<(Vec<f64>, bool), Error> {
        let mut residuals = Vec::new();
        for &m in &SWEEP_STEPS {
            let path = PathSpec::new(baseline.clone(), target.clone(), m, Scheme::Trapezoid)?;
            residuals.push(relative_residual(model, &path)?);
        }
        let monotone = residuals.windows(2).all(|w| w[1] <= w[0]);
        Ok((residuals, monotone))
    };
    let outcome = match run() {
        Ok((residuals, monotone)) => {
            let last = *residuals.last().expect("non-empty sweep");
            let detail = residuals
                .iter()
                .zip(SWEEP_STEPS)
                .map(|(r, m)| format!("m={m}: {r:.1e}"))
                .collect::<Vec<_>>()
                .join(", ");
            if last <= SWEEP_TOLERANCE && monotone {
                Ok(detail)
            } else {
                Err(format!("{detail} (monotone: {monotone})"))
            }
        }
        Err(e) => Err(e.code().to_string()),
    };
    check(format!("completeness-sweep {name}"), outcome)
}

fn linear_residual_row(seed: u64) -> CheckRow {
    let model = fixtures::linear_model(3, 64, seed ^ 0xab);
    let (target, baseline) = fixtures::random_pair(3, 64, 512.0, seed ^ 0xcd);
    let outcome = (|| -> Result<String, String> {
        let path = PathSpec::new(baseline, target, 16, Scheme::Trapezoid)
            .map_err(|e| e.code().to_string())?;
        let rel = relative_residual(&model, &path).map_err(|e| e.code().to_string())?;
        if rel <= 1e-12 {
            Ok(format!("residual {rel:.1e}"))
        } else {
            Err(format!("residual {rel:.1e} > 1e-12"))
        }
    })();
    check("completeness-linear", outcome)
}

fn edge_identity_rows(seed: u64) -> Vec<CheckRow> {
    let model = fixtures::tanh_mlp(3, 32, &[12], seed ^ 0x11);
    let (target, baseline) = fixtures::random_pair(3, 32, 512.0, seed ^ 0x22);
    let mut rows = Vec::new();

    let sym_and_complete = (|| -> Result<(String, String), Error> {
        let path = PathSpec::new(baseline.clone(), target.clone(), 64, Scheme::Trapezoid)?;
        let w = alignment_scores(&model, &path)?;
        for i in 0..3 {
            for j in 0..3 {
                if w.matrix()[(i, j)] != w.matrix()[(j, i)] {
                    return Err(Error::InvalidConfig(format!(
                        "asymmetry at ({i},{j})"
                    )));
                }
            }
        }
        // Recompute the output change independently through the model.
        let delta_f = forward(&model, &target)? - forward(&model, &baseline)?;
        let e = edge_scores(&w, forward(&model, &target)?, forward(&model, &baseline)?)?;
        let mut total = 0.0;
        for i in 0..3 {
            for j in i + 1..3 {
                total += e.matrix()[(i, j)];
            }
        }
        let rel = (total - delta_f).abs() / delta_f.abs().max(1.0);
        if rel > EDGE_TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "edge completeness off by {rel:.1e}"
            )));
        }
        Ok((
            "W symmetric".to_string(),
            format!("sum E vs dF rel err {rel:.1e}"),
        ))
    })();
    match sym_and_complete {
        Ok((sym, comp)) => {
            rows.push(check("edge-symmetry", Ok(sym)));
            rows.push(check("edge-completeness", Ok(comp)));
        }
        Err(e) => {
            rows.push(check("edge-symmetry", Err(e.to_string())));
            rows.push(check("edge-completeness", Err(e.to_string())));
        }
    }

    let degenerate = (|| -> Result<String, String> {
        let code = |e: Error| e.code().to_string();
        let row: Vec<f64> = (0..32).map(|k| 0.5 + 0.3 * ((k as f64) * 0.4).sin()).collect();
        let flat: Vec<f64> = row.iter().cycle().take(96).cloned().collect();
        let same = LeadTimeMatrix::with_default_names(
            Array2::from_shape_vec((3, 32), flat).unwrap(),
            512.0,
        )
        .map_err(code)?;
        let zeros =
            LeadTimeMatrix::with_default_names(Array2::from_elem((3, 32), 0.25), 512.0)
                .map_err(code)?;
        let path = PathSpec::new(zeros, same, 16, Scheme::Trapezoid).map_err(code)?;
        let w = alignment_scores(&model, &path).map_err(code)?;
        match edge_scores(&w, 1.0, 0.0) {
            Err(Error::DegenerateAlignment) => Ok("degenerate regime raised".to_string()),
            Ok(_) => Err("identical leads did not raise DegenerateAlignment".to_string()),
            Err(other) => Err(other.code().to_string()),
        }
    })();
    rows.push(check("edge-degenerate", degenerate));
    rows
}

pub(crate) fn cmd_verify(args: VerifyArgs) -> CliResult<u8> {
    let seed = args.seed.wrapping_add(0x7331);
    let mut rows = Vec::new();

    for (name, model) in fixtures::bundled_models(3, 64) {
        rows.push(fd_row(&name, &model, seed));
    }
    rows.push(sweep_row("tanh-16", &fixtures::tanh_mlp(3, 64, &[16], 102), seed));
    rows.push(linear_residual_row(seed));
    rows.extend(edge_identity_rows(seed));

    if let Some(path) = &args.model {
        match load_model(path) {
            Ok(model) => {
                rows.push(fd_row("user-model", &model, seed));
                rows.push(sweep_row("user-model", &model, seed));
            }
            Err(e) => rows.push(check(
                "user-model-load",
                Err(format!("{}: {}", e.code, e.message)),
            )),
        }
    }

    println!("{:<34} result", "check");
    let mut all_pass = true;
    for row in &rows {
        match &row.outcome {
            Ok(detail) => println!("{:<34} PASS  {detail}", row.name),
            Err(detail) => {
                all_pass = false;
                println!("{:<34} FAIL  {detail}", row.name);
            }
        }
    }
    Ok(if all_pass { 0 } else { 1 })
}
