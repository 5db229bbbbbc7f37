use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use wcreg::adversary::{bump_pair, sample_feasible, sine_pair, sine_pair_nodes, sup_error_estimate, ClassKind, FeasibleClass};
use wcreg::differentiator::{regularize, step_nodes};
use wcreg::grid::{add_noise, integrate};
use wcreg::modulus::{modulus_bruteforce, modulus_search, LatticeCompactum, LatticeKind, SearchDomain};
use wcreg::variational::{convergence_study, CompactumSpec, Phi, ProblemSpec, StudyConfig, StudyRow};
use wcreg::{format_float, log_log_slope, GridFunction, HolderParams, NoiseModel, NoisyData};

use crate::config::{ClassName, Command, ExperimentConfig, LatticeName, Method, NoiseKind, OperatorKind, PhiKind, Truth};
use crate::CliError;

/// Runs the configured command and returns the files written, in order.
pub fn run(config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let command = config
        .command
        .ok_or_else(|| CliError::Config("no command given".into()))?;
    config.validate(command)?;
    let mut out = Output::new(&config.out)?;
    match command {
        Command::Differentiate => differentiate(config, &mut out)?,
        Command::Sweep => sweep(config, &mut out)?,
        Command::Adversary => adversary(config, &mut out)?,
        Command::Variational => variational(config, &mut out)?,
        Command::Modulus => modulus(config, &mut out)?,
    }
    out.write("config.txt", &config.to_string())?;
    Ok(out.written)
}

struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Output {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).map_err(|source| CliError::Output {
            path: path.clone(),
            source,
        })?;
        self.written.push(path);
        Ok(())
    }
}

fn sorted_deltas(config: &ExperimentConfig) -> Vec<f64> {
    let mut d = config.deltas.clone();
    d.sort_by(f64::total_cmp);
    d
}

fn truth(config: &ExperimentConfig, nodes: usize) -> Result<GridFunction, CliError> {
    let amp = config.amplitude;
    let f: Box<dyn Fn(f64) -> f64> = match config.truth {
        Truth::Quadratic => Box::new(move |x| amp * x),
        Truth::Constant => Box::new(move |_| amp),
        Truth::Sine(k) => Box::new(move |x| amp * (2.0 * PI * k * x).sin()),
        Truth::AbsShift => Box::new(move |x| amp * (x - 0.5).abs()),
    };
    Ok(GridFunction::from_fn(nodes, f)?)
}

fn noise_model(kind: NoiseKind, step_nodes: usize) -> Option<NoiseModel> {
    match kind {
        NoiseKind::Uniform => Some(NoiseModel::UniformIid),
        NoiseKind::Alternating => Some(NoiseModel::Alternating),
        NoiseKind::StencilWorst => Some(NoiseModel::StencilWorstCase { step_nodes }),
        NoiseKind::None => None,
    }
}

fn synthetic_data(config: &ExperimentConfig, g: &GridFunction, delta: f64, step: usize) -> Result<NoisyData, CliError> {
    Ok(match noise_model(config.noise, step) {
        Some(model) => add_noise(g, delta, model, config.seed)?,
        None => NoisyData::new(g.clone(), delta)?,
    })
}

fn csv_row(values: &[f64]) -> String {
    let cells: Vec<String> = values.iter().map(|v| format_float(*v)).collect();
    cells.join(",") + "\n"
}

fn differentiate(config: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let params = HolderParams::new(config.a, config.m)?;
    let delta = config.deltas[0];
    let data = match &config.input {
        Some(path) => {
            let file = File::open(path)
                .map_err(|e| CliError::Config(format!("cannot open input {}: {e}", path.display())))?;
            let g = GridFunction::read_csv(BufReader::new(file))
                .map_err(|e| CliError::Config(format!("cannot parse input {}: {e}", path.display())))?;
            NoisyData::new(g, delta)?
        }
        None => {
            let g = integrate(&truth(config, config.grid)?);
            let step = step_nodes(delta, &params, config.grid)?;
            synthetic_data(config, &g, delta, step)?
        }
    };
    let result = regularize(&data, &params)?;
    out.write("reconstruction.csv", &result.u_delta.to_csv_string())?;
    out.write(
        "summary.csv",
        &format!("delta,h,eta\n{}", csv_row(&[delta, result.h_used, result.eta])),
    )?;
    Ok(())
}

fn sweep(config: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let params = HolderParams::new(config.a, config.m)?;
    let u = truth(config, config.grid)?;
    let g = integrate(&u);
    let mut body = String::from("delta,h,eta,sup_err_est\n");
    let (mut eta_pts, mut err_pts) = (Vec::new(), Vec::new());
    for delta in sorted_deltas(config) {
        let step = step_nodes(delta, &params, config.grid)?;
        let data = synthetic_data(config, &g, delta, step)?;
        let result = regularize(&data, &params)?;
        let class = FeasibleClass::new(ClassKind::Holder(params), data).with_anchor(u.clone());
        let mut ensemble = vec![u.clone()];
        ensemble.extend(sample_feasible(&class, config.ensemble, config.seed)?);
        let est = sup_error_estimate(&result.u_delta, &class, &ensemble)?;
        body.push_str(&csv_row(&[delta, result.h_used, result.eta, est.value]));
        eta_pts.push((delta, result.eta));
        err_pts.push((delta, est.value));
    }
    let _ = writeln!(
        body,
        "# slope eta={} sup_err_est={} closed_form={}",
        format_float(log_log_slope(&eta_pts)),
        format_float(log_log_slope(&err_pts)),
        format_float(1.0 - 1.0 / config.a)
    );
    out.write("sweep.csv", &body)
}

fn adversary(config: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let mut body = String::from("delta,separation\n");
    for (i, delta) in sorted_deltas(config).into_iter().enumerate() {
        let pair = match config.class {
            ClassName::Sup => {
                let nodes = config.grid.max(sine_pair_nodes(config.m, delta)?);
                sine_pair(config.m, delta, nodes)?
            }
            ClassName::Lip => bump_pair(config.m, delta, config.grid)?,
        };
        out.write(&format!("pair_{i}.csv"), &pair.to_csv_string())?;
        body.push_str(&csv_row(&[delta, pair.separation]));
    }
    out.write("separation.csv", &body)
}

fn compactum(config: &ExperimentConfig) -> Result<CompactumSpec, CliError> {
    let phi = match config.phi {
        PhiKind::Sup => Phi::SupNorm,
        PhiKind::Holder => Phi::HolderNorm(config.a),
    };
    Ok(CompactumSpec::new(phi, config.c)?)
}

fn problem(config: &ExperimentConfig, nodes: usize) -> Result<ProblemSpec, CliError> {
    Ok(match &config.operator {
        OperatorKind::Integration => ProblemSpec::integration(),
        OperatorKind::Identity => ProblemSpec::identity(nodes)?,
        OperatorKind::File(path) => {
            let file = File::open(path)
                .map_err(|e| CliError::Config(format!("cannot open operator {}: {e}", path.display())))?;
            ProblemSpec::read_matrix(BufReader::new(file))
                .map_err(|e| CliError::Config(format!("cannot parse operator {}: {e}", path.display())))?
        }
    })
}

fn lattice(config: &ExperimentConfig, spec: CompactumSpec) -> Result<LatticeCompactum, CliError> {
    let kind = match config.lattice {
        LatticeName::Constants => LatticeKind::Constants,
        LatticeName::Product => LatticeKind::Product,
    };
    let levels = LatticeCompactum::uniform_levels(-config.c, config.c, config.levels);
    Ok(LatticeCompactum::new(config.nodes, levels, spec, kind)?)
}

fn variational(config: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    if config.noise == NoiseKind::StencilWorst {
        return Err(CliError::Config(
            "stencil-worst noise is tied to the difference step; use uniform, alternating or none".into(),
        ));
    }
    let spec = compactum(config)?;
    let prob = problem(config, config.grid)?;
    let u = truth(config, config.grid)?;
    let study = StudyConfig {
        noise: noise_model(config.noise, 1),
        seed: config.seed,
        budget: config.budget,
        ensemble: config.ensemble,
        lattice: Some(lattice(config, spec)?),
    };
    let rows = convergence_study(&u, &sorted_deltas(config), &spec, &prob, &study)?;
    let mut body = format!("{}\n", StudyRow::HEADER);
    for row in rows {
        body.push_str(&csv_row(&row.fields()));
    }
    out.write("convergence.csv", &body)
}

fn modulus(config: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let spec = compactum(config)?;
    let k = lattice(config, spec)?;
    let mut body = String::from("delta,omega\n");
    for delta in sorted_deltas(config) {
        let omega = match config.method {
            Method::Bruteforce => modulus_bruteforce(&k, delta, &problem(config, k.nodes)?)?,
            Method::Search => modulus_search(
                SearchDomain::Lattice(&k),
                delta,
                &problem(config, k.nodes)?,
                config.budget,
                config.seed,
            )?,
            Method::SearchGrid => modulus_search(
                SearchDomain::Grid {
                    nodes: config.grid,
                    spec,
                },
                delta,
                &problem(config, config.grid)?,
                config.budget,
                config.seed,
            )?,
        };
        body.push_str(&csv_row(&[delta, omega]));
    }
    out.write("modulus.csv", &body)
}

/// Parses a numeric CSV table written by this tool: header plus rows,
/// `#` lines skipped.
pub fn read_table(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CliError::Config("empty table".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for line in lines {
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| CliError::Config(format!("bad row {line:?}: {e}")))?;
        if row.len() != header.len() {
            return Err(CliError::Config(format!("row {line:?} has {} cells, header has {}", row.len(), header.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}
