use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use hamsdm::bench::{closed_forms, measure, Measured, Protocol, TableRow};
use hamsdm::net::{estimate_cost, estimate_wallclock, Phase};
use hamsdm::nn::fit::{fit_activation, relu};
use hamsdm::nn::model::{encode_idx, read_idx};
use hamsdm::nn::zoo::LENET_INPUT;
use hamsdm::nn::{run_network, toy_lenet, Model, RunConfig};
use hamsdm::oracle::{argmax, eval_network, exhaustive_mult, exhaustive_round_trip, tamper_trials, Activation};
use hamsdm::protocols::{ProtocolError, Session, SessionConfig};
use hamsdm::ring::RingParams;

use crate::Settings;

fn write_out(settings: &Settings, name: &str, text: &str) -> Result<()> {
    if let Some(dir) = &settings.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

const MEASURE_HEADER: &str = "protocol,n,k,prep_elements,prep_rounds,online_elements,online_rounds,online_bytes,online_seconds";

fn measure_csv(m: &Measured, secs: f64) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{secs:.6}",
        m.protocol, m.n, m.k, m.prep.elements, m.prep.rounds, m.online.elements, m.online.rounds, m.online.bytes
    )
}

pub fn bench(settings: &Settings, protocol: &str, check_tables: bool, csv: bool) -> Result<ExitCode> {
    let selected: Vec<Protocol> = if protocol == "all" {
        Protocol::ALL.to_vec()
    } else {
        vec![protocol.parse().map_err(anyhow::Error::msg)?]
    };
    let mut measured = Vec::new();
    for p in selected {
        let n = if p.two_party_only() {
            if protocol != "all" && settings.n != 2 {
                bail!("{p} runs with exactly two parties, not {}", settings.n);
            }
            2
        } else {
            settings.n
        };
        measured.push(measure(p, n, settings.k, settings.params, settings.seed)?);
    }

    let mut table = format!(
        "{:<12} {:>3} {:>3} {:>10} {:>6} {:>10} {:>6} {:>10} {:>12}\n",
        "protocol", "n", "k", "prep elems", "rounds", "online", "rounds", "bytes", "online secs"
    );
    let mut lines = vec![MEASURE_HEADER.to_string()];
    for m in &measured {
        let secs = estimate_cost(m.online, &settings.profile);
        table.push_str(&format!(
            "{:<12} {:>3} {:>3} {:>10} {:>6} {:>10} {:>6} {:>10} {:>12.6}\n",
            m.protocol.name(),
            m.n,
            m.k,
            m.prep.elements,
            m.prep.rounds,
            m.online.elements,
            m.online.rounds,
            m.online.bytes,
            secs
        ));
        lines.push(measure_csv(m, secs));
    }
    let measure_text = lines.join("\n") + "\n";
    if csv {
        print!("{measure_text}");
    } else {
        println!("profile {} (rtt {} s, {} bit/s)", settings.profile_name, settings.profile.rtt, settings.profile.bandwidth);
        print!("{table}");
    }
    write_out(settings, "bench.csv", &measure_text)?;

    if !check_tables {
        return Ok(ExitCode::SUCCESS);
    }
    let rows: Vec<TableRow> = measured.iter().flat_map(closed_forms).collect();
    let mut table_csv = vec![TableRow::CSV_HEADER.to_string()];
    table_csv.extend(rows.iter().map(TableRow::csv));
    let table_csv = table_csv.join("\n") + "\n";
    if csv {
        print!("{table_csv}");
    } else {
        println!();
        for r in &rows {
            println!("{r}");
        }
    }
    write_out(settings, "tables.csv", &table_csv)?;
    let failing = rows.iter().filter(|r| !r.pass()).count();
    eprintln!("{} of {} closed-form rows match", rows.len() - failing, rows.len());
    Ok(if failing == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

#[derive(Serialize)]
struct FitFile<'a> {
    activation: &'a str,
    degree: usize,
    lo: f64,
    hi: f64,
    points: usize,
    d: u32,
    coeffs: &'a [i128],
    mse: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn fit(settings: &Settings, activation: &str, lo: f64, hi: f64, points: usize) -> Result<ExitCode> {
    let target: fn(f64) -> f64 = match activation {
        "relu" => relu,
        "sigmoid" => sigmoid,
        "tanh" => f64::tanh,
        other => bail!("unknown activation {other:?}; use relu, sigmoid or tanh"),
    };
    let d = settings.params.d;
    let fit = fit_activation(target, lo, hi, settings.k, points, d)?;
    println!("{activation} degree {} on [{lo}, {hi}] with {points} points, d={d}", fit.degree);
    println!("{:>3} {:>12} {:>16}", "j", "raw", "value");
    for (j, c) in fit.coeffs.iter().enumerate() {
        println!("{j:>3} {c:>12} {:>16.10}", *c as f64 / (d as f64).exp2());
    }
    println!("mse {:.6}, max residual {:.6}", fit.mse, fit.max_residual(target));
    let file = FitFile {
        activation,
        degree: fit.degree,
        lo,
        hi,
        points,
        d,
        coeffs: &fit.coeffs,
        mse: fit.mse,
    };
    write_out(settings, "fit.json", &serde_json::to_string_pretty(&file)?)?;
    Ok(ExitCode::SUCCESS)
}

pub fn demo(settings: &Settings, images: usize) -> Result<ExitCode> {
    let dir = settings.out_dir("demo");
    let model = toy_lenet(settings.seed, &settings.params)?;
    let path = model.save(&dir, "lenet", &settings.params)?;
    let mut rng = ChaCha20Rng::seed_from_u64(settings.seed ^ 0x1d);
    let (rows, cols) = (LENET_INPUT[1], LENET_INPUT[2]);
    let pixels: Vec<u8> = (0..images * rows * cols).map(|_| rng.gen()).collect();
    let idx = dir.join("images.idx");
    fs::write(&idx, encode_idx(&pixels, images, rows, cols)).with_context(|| format!("writing {}", idx.display()))?;
    println!("model  {}", path.display());
    println!("images {} ({images} of {rows}x{cols})", idx.display());
    Ok(ExitCode::SUCCESS)
}

pub fn infer(settings: &Settings, model_path: &Path, input: &Path, index: usize) -> Result<ExitCode> {
    let params = settings.params;
    let model = Model::load(model_path, &params)?;
    let images = read_idx(input, &params)?;
    let Some(image) = images.get(index) else {
        bail!("{} holds {} images, no index {index}", input.display(), images.len());
    };
    let n = settings.n;
    let config = SessionConfig::new(params, n, settings.seed).with_tamper(settings.tamper_policy(n)?);
    let mut sess = Session::new(config)?;
    let run = run_network(&mut sess, &model.layers, image, &RunConfig::for_parties(n));
    let ledger = sess.fabric.ledger();
    let out = match run {
        Ok(out) => out,
        Err(hamsdm::nn::NnError::Protocol(ProtocolError::Abort(why))) => {
            println!("aborted: {why}; no output was released");
            return Ok(ExitCode::FAILURE);
        }
        Err(e) => return Err(e.into()),
    };
    let logits = out.logits(&params);
    let reference = eval_network(&model.layers, image, &params, Activation::Poly)?;
    let scale = (params.d as f64).exp2();
    println!("image {index} of {}, {n} parties, delivered to P{n}", input.display());
    for (i, v) in logits.iter().enumerate() {
        println!("  logit {i:>2} {:>12.6}   plaintext {:>12.6}", *v as f64 / scale, reference.logits[i] as f64 / scale);
    }
    println!(
        "argmax {} (plaintext {})",
        argmax(&logits).map_or("-".into(), |v| v.to_string()),
        argmax(&reference.logits).map_or("-".into(), |v| v.to_string())
    );
    println!("{:<11} {:>8} {:>12} {:>14} {:>12}", "phase", "rounds", "elements", "bytes", "est. secs");
    for phase in [Phase::Preprocess, Phase::Online] {
        let c = ledger.phase(phase);
        println!(
            "{:<11} {:>8} {:>12} {:>14} {:>12.4}",
            phase.to_string(),
            c.rounds,
            c.elements,
            c.bytes,
            estimate_wallclock(&ledger, phase, &settings.profile)
        );
    }
    println!("profile {}", settings.profile_name);
    let csv: String = std::iter::once("index,logit".to_string())
        .chain(logits.iter().enumerate().map(|(i, v)| format!("{i},{}", *v as f64 / scale)))
        .collect::<Vec<_>>()
        .join("\n");
    write_out(settings, "logits.csv", &(csv + "\n"))?;
    Ok(ExitCode::SUCCESS)
}

/// Largest ring the exhaustive sweep accepts.
const CHECK_MAX_BITS: u32 = 6;

pub fn check(settings: &Settings) -> Result<ExitCode> {
    let (l, s) = settings.explicit_ring.unwrap_or((4, 4));
    if l > CHECK_MAX_BITS {
        bail!("exhaustive sweep covers 2^(2l) pairs; use l <= {CHECK_MAX_BITS}");
    }
    let seeds = [settings.seed];
    let reports = [
        exhaustive_mult(l, s, settings.n, &seeds)?,
        exhaustive_round_trip(l, s, settings.n, &seeds)?,
    ];
    for r in &reports {
        print!("{r}");
    }
    Ok(if reports.iter().all(|r| r.passed()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

pub fn tamper_test(settings: &Settings, trials: usize) -> Result<ExitCode> {
    let p: RingParams = settings.params;
    let report = tamper_trials(p, trials, settings.seed)?;
    println!("l={} s={} d={}", p.l, p.s, p.d);
    print!("{report}");
    for u in &report.unfair {
        println!("  unfair: {u}");
    }
    write_out(settings, "tamper.txt", &report.to_string())?;
    Ok(if report.unfair.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
