use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use cslearn::baselines::StlsqParams;
use cslearn::dictionary::{build_dictionary, default_names, evaluate_dictionary, term_to_string, Dictionary};
use cslearn::dynsys::{ScenarioConfig, SystemKind, Trajectory};
use cslearn::experiments::bench::{run_scenario_grid, write_results_csv, BenchConfig};
use cslearn::experiments::summary::summarize;
use cslearn::experiments::{fit_target, gen_polynomial_data, gen_random_polynomial, Method, MethodOutput, MethodSettings};
use cslearn::regression::{classical_criteria, DesignMatrix};
use cslearn::rng::derive_seed;

use crate::{table, BenchArgs, DictArgs, FitArgs, FitMode, Format, GenArgs, GenTarget, Globals};

pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }

    fn method(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn io_failure(e: io::Error) -> Failure {
    Failure::internal(e.to_string())
}

/// Writes through `f` to the `--out` file, or stdout when absent.
fn emit(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> CmdResult {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Failure::internal(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            f(&mut w).and_then(|_| w.flush()).map_err(io_failure)
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w).and_then(|_| w.flush()).map_err(io_failure)
        }
    }
}

fn emit_json(out: Option<&Path>, value: &Value) -> CmdResult {
    emit(out, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

fn term_entries(dict: &Dictionary, labels: &[String]) -> Vec<Value> {
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    dict.terms
        .iter()
        .enumerate()
        .map(|(i, t)| json!({ "index": i, "name": term_to_string(t, &refs), "exponents": t.exponents }))
        .collect()
}

pub fn dict(args: &DictArgs, g: &Globals) -> CmdResult {
    let l = args.features as usize;
    let dict = build_dictionary(l, args.m1, args.m2);
    let labels = default_names(l);
    match g.format {
        Format::Json => emit_json(
            g.out.as_deref(),
            &json!({
                "features": l,
                "max_individual": args.m1,
                "max_collective": args.m2,
                "p": dict.len(),
                "terms": term_entries(&dict, &labels),
            }),
        ),
        Format::Csv => {
            let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
            emit(g.out.as_deref(), |w| {
                writeln!(w, "index,term,{}", labels.iter().map(|n| format!("e_{n}")).collect::<Vec<_>>().join(","))?;
                for (i, t) in dict.terms.iter().enumerate() {
                    let e: Vec<String> = t.exponents.iter().map(u32::to_string).collect();
                    writeln!(w, "{i},{},{}", term_to_string(t, &refs), e.join(","))?;
                }
                Ok(())
            })
        }
    }
}

fn require_seed(g: &Globals, what: &str) -> Result<u64, Failure> {
    g.seed
        .ok_or_else(|| Failure::usage(format!("--seed is required for {what}")))
}

pub fn gen(args: &GenArgs, g: &Globals) -> CmdResult {
    match args.system {
        GenTarget::Lorenz | GenTarget::Rf => {
            let system = if args.system == GenTarget::Lorenz {
                SystemKind::Lorenz
            } else {
                SystemKind::RabinovichFabrikant
            };
            let dt = args.dt.ok_or_else(|| Failure::usage("--dt is required for system simulation"))?;
            let seed = if args.sigma > 0.0 {
                derive_seed(require_seed(g, "noisy simulation")?, &["gen", system.name(), "noise"])
            } else {
                g.seed.unwrap_or(0)
            };
            let cfg = ScenarioConfig {
                system,
                n: args.n,
                dt,
                sigma: args.sigma,
                seed,
            };
            cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
            eprintln!("{}", json!({ "scenario": cfg, "duration": cfg.duration() }));
            let traj = cfg.simulate().map_err(|e| Failure::method(e.to_string()))?;
            emit(g.out.as_deref(), |w| traj.write_csv(w))
        }
        GenTarget::Poly => {
            let master = require_seed(g, "polynomial generation")?;
            if args.n < 1 {
                return Err(Failure::usage("--n must be at least 1"));
            }
            if !(args.sigma >= 0.0) {
                return Err(Failure::usage("--sigma must be non-negative"));
            }
            let spec = gen_random_polynomial(args.size, derive_seed(master, &["gen", "polynomial"]))
                .map_err(|e| Failure::usage(e.to_string()))?;
            let (x, y) = gen_polynomial_data(&spec, args.n, args.sigma, derive_seed(master, &["gen", "data"]))
                .map_err(|e| Failure::usage(e.to_string()))?;
            eprintln!("{}", json!({ "polynomial": spec, "n": args.n, "sigma": args.sigma }));
            emit(g.out.as_deref(), |w| {
                writeln!(w, "x1,x2,x3,y")?;
                for (row, v) in x.iter().zip(&y) {
                    writeln!(w, "{},{},{},{v}", row[0], row[1], row[2])?;
                }
                Ok(())
            })
        }
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table(path: &Path) -> Result<Table, Failure> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Failure::data(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Failure::data(e.to_string()))?;
        let row = rec
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Failure::data(format!("row {}: {e}", i + 2)))?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Failure::data(format!("row {}: non-finite value", i + 2)));
        }
        rows.push(row);
    }
    if header.is_empty() || rows.is_empty() {
        return Err(Failure::data("no data rows"));
    }
    Ok(Table { header, rows })
}

fn settings_from(args: &FitArgs) -> MethodSettings {
    let mut s = MethodSettings::default();
    s.cs.m_max = args.m_max;
    s.cs.s = args.top_s;
    s.cs.t = args.top_t;
    s.cs.c_min = args.c_min;
    if let Some(threshold) = args.threshold {
        s.stlsq = StlsqParams {
            threshold,
            ..s.stlsq
        };
    }
    s
}

fn target_report(name: &str, out: &MethodOutput, k: &DesignMatrix, y: &[f64], dict: &Dictionary, labels: &[String]) -> Value {
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let idx = out.fit.mask.indices();
    let terms: Vec<Value> = idx
        .iter()
        .zip(&out.fit.weights)
        .map(|(&i, w)| {
            json!({
                "index": i,
                "name": term_to_string(&dict.terms[i], &refs),
                "exponents": dict.terms[i].exponents,
                "weight": w,
            })
        })
        .collect();
    let criteria = classical_criteria(&k.select(&idx), y, &out.fit.weights)
        .ok()
        .map_or(Value::Null, |c| json!(c));
    json!({
        "target": name,
        "terms": terms,
        "r_squared": out.fit.r_squared,
        "sigma_hat_sq": out.fit.sigma_hat_sq,
        "log_evidence": out.fit.log_evidence,
        "criteria": criteria,
        "diagnostics": out.diagnostics,
    })
}

pub fn fit(args: &FitArgs, g: &Globals) -> CmdResult {
    let method: Method = args.method.parse().map_err(|e: cslearn::Error| Failure::usage(e.to_string()))?;
    if matches!(method, Method::Fixed(_)) {
        return Err(Failure::usage("fixed models can only be used in benchmarks"));
    }
    let table = read_table(&args.data)?;
    let settings = settings_from(args);

    // (feature labels, feature rows, targets as (name, values))
    let (labels, states, targets): (Vec<String>, Vec<Vec<f64>>, Vec<(String, Vec<f64>)>) = match args.mode {
        FitMode::Regression => {
            if table.header.len() < 2 || table.header.last().map(String::as_str) != Some("y") {
                return Err(Failure::data("regression input needs feature columns followed by a `y` column"));
            }
            let l = table.header.len() - 1;
            let x = table.rows.iter().map(|r| r[..l].to_vec()).collect();
            let y = table.rows.iter().map(|r| r[l]).collect();
            (table.header[..l].to_vec(), x, vec![("y".to_string(), y)])
        }
        FitMode::Dynsys => {
            let has_time = table.header.first().map(String::as_str) == Some("t");
            let traj = if has_time {
                let times: Vec<f64> = table.rows.iter().map(|r| r[0]).collect();
                Trajectory {
                    dt: times.get(1).map_or(0.0, |t1| t1 - times[0]),
                    states: table.rows.iter().map(|r| r[1..].to_vec()).collect(),
                    times,
                }
            } else {
                let dt = args
                    .dt
                    .ok_or_else(|| Failure::usage("--dt is required when the file has no t column"))?;
                Trajectory {
                    times: (0..table.rows.len()).map(|i| i as f64 * dt).collect(),
                    states: table.rows.clone(),
                    dt,
                }
            };
            if traj.len() < 2 || !(traj.dt > 0.0) {
                return Err(Failure::data("need at least two equally spaced states"));
            }
            let labels: Vec<String> = table.header[usize::from(has_time)..].to_vec();
            let diff = cslearn::dynsys::finite_difference(&traj).map_err(|e| Failure::data(e.to_string()))?;
            let targets = labels
                .iter()
                .zip(diff.targets)
                .map(|(n, y)| (format!("d{n}/dt"), y))
                .collect();
            (labels, diff.states, targets)
        }
    };
    let dict = build_dictionary(labels.len(), args.m1, args.m2);
    let k = evaluate_dictionary(&states, &dict).map_err(|e| Failure::data(e.to_string()))?;

    let mut reports = Vec::new();
    for (name, y) in &targets {
        match fit_target(&method, y, &k, &settings) {
            Ok(out) => reports.push(target_report(name, &out, &k, y, &dict, &labels)),
            Err(e) => {
                let report = json!({
                    "method": method,
                    "error": { "target": name, "kind": "method_failure", "message": e.to_string() },
                });
                emit_json(g.out.as_deref(), &report)?;
                return Err(Failure::method(format!("{method} failed on {name}: {e}")));
            }
        }
    }
    match g.format {
        Format::Json => emit_json(
            g.out.as_deref(),
            &json!({
                "method": method,
                "mode": format!("{:?}", args.mode).to_lowercase(),
                "dictionary": { "features": labels, "max_individual": args.m1, "max_collective": args.m2, "p": dict.len() },
                "rows": states.len(),
                "targets": reports,
            }),
        ),
        Format::Csv => emit(g.out.as_deref(), |w| {
            writeln!(w, "target,index,term,weight")?;
            for r in &reports {
                for t in r["terms"].as_array().into_iter().flatten() {
                    writeln!(w, "{},{},{},{}", r["target"].as_str().unwrap_or(""), t["index"], t["name"].as_str().unwrap_or(""), t["weight"])?;
                }
            }
            Ok(())
        }),
    }
}

pub fn bench(args: &BenchArgs, g: &Globals) -> CmdResult {
    let text = fs::read_to_string(&args.config).map_err(|e| Failure::data(format!("{}: {e}", args.config.display())))?;
    let mut config: BenchConfig = serde_json::from_str(&text).map_err(|e| Failure::data(format!("config: {e}")))?;
    if let Some(seed) = g.seed {
        config.master_seed = seed;
    }
    if let Some(methods) = &args.methods {
        config.methods = methods
            .iter()
            .map(|m| m.parse())
            .collect::<Result<_, cslearn::Error>>()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    let results = run_scenario_grid(&config).map_err(|e| Failure::data(e.to_string()))?;
    if results.scenarios_executed == 0 {
        return Err(Failure {
            code: 5,
            message: "no scenario could be executed".into(),
        });
    }
    let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(io_failure)?;
    let csv_path = dir.join("results.csv");
    emit(Some(&csv_path), |w| write_results_csv(&results, w))?;
    let summary = summarize(&results);
    emit_json(Some(&dir.join("summary.json")), &json!(summary))?;
    let stdout = io::stdout();
    table::print_summary(&mut stdout.lock(), &summary).map_err(io_failure)?;
    Ok(())
}
