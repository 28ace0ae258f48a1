use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use netreg::io::{
    align_network, fmt_f64, format_matrix, load_network, parse_matrix, Normalization, Table,
};
use netreg::pipeline::{
    anomaly_table, consecutive_table, cv_table, distance_matrix_table, mds_tables,
    pca_variance_table, predict_points, rerun, run_pipeline, scores_table, series_table, Bandwidth,
    QueryGrid, RhoMethod, RunConfig, Session,
};
use netreg::regression::{fit_curve_with, ReverseNw};
use netreg::trend::{
    classical_mds, consecutive_distances, estimate_rho_ls, estimate_rho_pc1,
    mahalanobis_distance_matrix, pairwise_distances, pca_fit, pca_project, rank_anomalies,
    residual_distances,
};
use netreg::{laplacian_from_network, trace_normalize, validate_laplacian, Error, Result};

#[derive(Parser)]
#[command(
    name = "netreg",
    version,
    about = "Nonparametric regression for network-valued data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a manifest, a network file, or a dense matrix.
    Validate(ValidateArgs),
    /// Pairwise or consecutive power-metric distances between observations.
    Distances(DistancesArgs),
    /// Fit the regression curve over a query grid and write one matrix per point.
    Fit(FitArgs),
    /// Leave-one-out cross-validation table for the bandwidth.
    Cv(CvArgs),
    /// Fitted Laplacian at given covariate values.
    Predict(PredictArgs),
    /// Predict the covariate of a network.
    ReversePredict(ReverseArgs),
    /// Tangent-space principal components of the observations.
    Pca(PcaArgs),
    /// Mahalanobis AR(1) multidimensional scaling.
    Mds(MdsArgs),
    /// Residual distances from the fitted curve, or the anomaly ranking.
    Residuals(ResidualsArgs),
    /// Full analysis into an output directory.
    Run(RunArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Dataset manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// TOML run configuration; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Power of the metric (1 = Euclidean, 0.5 = square root).
    #[arg(long)]
    alpha: Option<f64>,
    /// Eigenvalues below this are treated as zero.
    #[arg(long)]
    eigenvalue_floor: Option<f64>,
    /// Z-score covariates before smoothing.
    #[arg(long)]
    standardize: bool,
    /// Projection KKT tolerance.
    #[arg(long)]
    projection_tol: Option<f64>,
    /// Projection iteration budget.
    #[arg(long)]
    projection_max_iter: Option<usize>,
    /// Write the table here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct KernelArgs {
    /// Bandwidth, or `cv` to cross-validate.
    #[arg(long)]
    bandwidth: Option<Bandwidth>,
    /// Candidate bandwidths for cross-validation.
    #[arg(long, value_delimiter = ',')]
    cv_grid: Option<Vec<f64>>,
    /// Kernel support radius in bandwidths.
    #[arg(long)]
    truncation_multiple: Option<f64>,
}

#[derive(Args, Clone)]
struct RhoArgs {
    #[arg(long)]
    rho_method: Option<RhoMethod>,
    #[arg(long)]
    rho_fixed: Option<f64>,
    /// Candidate values for the pc1grid estimator.
    #[arg(long, value_delimiter = ',')]
    rho_grid: Option<Vec<f64>>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, conflicts_with_all = ["network", "matrix"])]
    manifest: Option<PathBuf>,
    #[arg(long, conflicts_with = "matrix")]
    network: Option<PathBuf>,
    /// Dense whitespace-separated matrix to check against the Laplacian constraints.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Also check a run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistanceKind {
    Pairwise,
    Consecutive,
}

#[derive(Args)]
struct DistancesArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value_t = DistanceKind::Pairwise)]
    kind: DistanceKind,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// `auto`, or points separated by `;` with coordinates separated by `,`
    /// (with one covariate a plain comma list is a list of points).
    #[arg(long)]
    query_grid: Option<String>,
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    kernel: KernelArgs,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Covariate value (comma-separated coordinates); repeatable.
    #[arg(long, required = true, value_parser = parse_at)]
    at: Vec<Point>,
}

#[derive(Args)]
struct ReverseArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Edge-list file of the network whose covariate is predicted.
    #[arg(long)]
    network: PathBuf,
}

#[derive(Args)]
struct PcaArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 2)]
    components: usize,
    /// Print the explained variance table instead of scores.
    #[arg(long)]
    variance: bool,
}

#[derive(Args)]
struct MdsArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    rho: RhoArgs,
    #[arg(long, default_value_t = 2)]
    dims: usize,
    /// Print the eigenvalues instead of coordinates.
    #[arg(long)]
    eigenvalues: bool,
}

#[derive(Args)]
struct ResidualsArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Print the top-k ranking with the anomaly flag instead of every residual.
    #[arg(long)]
    top_k: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// Dataset manifest (not needed with --rerun).
    #[arg(long, required_unless_present = "rerun")]
    manifest: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eigenvalue_floor: Option<f64>,
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    projection_tol: Option<f64>,
    #[arg(long)]
    projection_max_iter: Option<usize>,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    rho: RhoArgs,
    #[arg(long)]
    query_grid: Option<String>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Repeat the run recorded in this metadata file.
    #[arg(long, conflicts_with = "manifest")]
    rerun: Option<PathBuf>,
}

fn parse_point(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("invalid number {t:?}"))
        })
        .collect()
}

#[derive(Clone)]
struct Point(Vec<f64>);

fn parse_at(s: &str) -> std::result::Result<Point, String> {
    parse_point(s).map(Point)
}

fn parse_query_grid(s: &str) -> Result<QueryGrid> {
    let s = s.trim();
    if s == "auto" {
        return Ok(QueryGrid::Auto);
    }
    let bad = |e: String| Error::InvalidParameter(format!("query grid: {e}"));
    let points = if s.contains(';') {
        s.split(';')
            .filter(|p| !p.trim().is_empty())
            .map(parse_point)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(bad)?
    } else {
        parse_point(s)
            .map_err(bad)?
            .into_iter()
            .map(|x| vec![x])
            .collect()
    };
    Ok(QueryGrid::Points(points))
}

fn base_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn apply_data(cfg: &mut RunConfig, d: &DataArgs) {
    if let Some(a) = d.alpha {
        cfg.alpha = a;
    }
    if let Some(f) = d.eigenvalue_floor {
        cfg.eigenvalue_floor = f;
    }
    if d.standardize {
        cfg.standardize = true;
    }
    if let Some(t) = d.projection_tol {
        cfg.projection_tol = t;
    }
    if d.projection_max_iter.is_some() {
        cfg.projection_max_iter = d.projection_max_iter;
    }
}

fn apply_kernel(cfg: &mut RunConfig, k: &KernelArgs) {
    if let Some(b) = k.bandwidth {
        cfg.bandwidth = b;
    }
    if k.cv_grid.is_some() {
        cfg.cv_grid = k.cv_grid.clone();
    }
    if let Some(t) = k.truncation_multiple {
        cfg.truncation_multiple = t;
    }
}

fn apply_rho(cfg: &mut RunConfig, r: &RhoArgs) {
    if let Some(m) = r.rho_method {
        cfg.rho_method = m;
    }
    if r.rho_fixed.is_some() {
        cfg.rho_fixed = r.rho_fixed;
        if r.rho_method.is_none() {
            cfg.rho_method = RhoMethod::Fixed;
        }
    }
    if r.rho_grid.is_some() {
        cfg.rho_grid = r.rho_grid.clone();
    }
}

fn config_for(d: &DataArgs, k: Option<&KernelArgs>) -> Result<RunConfig> {
    let mut cfg = base_config(d.config.as_deref())?;
    apply_data(&mut cfg, d);
    if let Some(k) = k {
        apply_kernel(&mut cfg, k);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn validate(args: ValidateArgs) -> Result<()> {
    if let Some(c) = &args.config {
        RunConfig::load(c)?;
        println!("config ok");
    }
    if let Some(m) = &args.manifest {
        let session = Session::open(m, &RunConfig::default())?;
        let d = &session.data;
        println!(
            "manifest ok: n={} m={} p={} sha256={}",
            d.len(),
            d.node_count(),
            d.covariate_dim(),
            session.loaded.digest
        );
    } else if let Some(n) = &args.network {
        let net = load_network(n)?;
        println!(
            "network ok: {} nodes, {} edges",
            net.node_count(),
            net.edges().len()
        );
    } else if let Some(path) = &args.matrix {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        let mat = parse_matrix(&text, path)?;
        let report = validate_laplacian(&mat, args.tol);
        if !report.is_valid() {
            return Err(Error::InvalidLaplacian(report.to_string()));
        }
        println!(
            "matrix ok: valid {}x{} graph Laplacian",
            mat.nrows(),
            mat.ncols()
        );
    } else if args.config.is_none() {
        return Err(Error::InvalidParameter(
            "give one of --manifest, --network, --matrix or --config".into(),
        ));
    }
    Ok(())
}

fn distances(args: DistancesArgs) -> Result<()> {
    let cfg = config_for(&args.data, None)?;
    let s = Session::open(&args.data.manifest, &cfg)?;
    let table = match args.kind {
        DistanceKind::Consecutive => {
            consecutive_table(&consecutive_distances(&s.data, &s.power)?, &s.data)
        }
        DistanceKind::Pairwise => {
            distance_matrix_table(s.data.labels(), &pairwise_distances(&s.data, &s.power)?)
        }
    };
    emit(args.data.out.as_deref(), &table.render())
}

fn fit(args: FitArgs) -> Result<()> {
    let mut cfg = config_for(&args.data, Some(&args.kernel))?;
    if let Some(q) = &args.query_grid {
        cfg.query_grid = parse_query_grid(q)?;
        cfg.validate()?;
    }
    let s = Session::open(&args.data.manifest, &cfg)?;
    let (kernel, _) = s.kernel(&cfg)?;
    let points = s.query_points(&cfg.query_grid)?;
    let fitted = predict_points(&s, &kernel, &points).map_err(|e| e.in_stage("fit"))?;
    fs::create_dir_all(&args.output_dir).map_err(|e| Error::Io {
        path: args.output_dir.clone(),
        source: e,
    })?;
    let names = s.covariate_names();
    let mut header = vec!["index".to_string(), "file".to_string()];
    header.extend(names.iter().cloned());
    let mut index = Table::new(header);
    for (q, (x, l)) in points.iter().zip(&fitted).enumerate() {
        let file = format!("point_{q:04}.txt");
        let path = args.output_dir.join(&file);
        fs::write(&path, format_matrix(l.matrix())).map_err(|e| Error::Io { path, source: e })?;
        let mut row = vec![q.to_string(), file];
        row.extend(x.iter().map(|&v| fmt_f64(v)));
        index.push(row);
    }
    index.write(args.output_dir.join("index.csv"))?;
    println!("h={} points={}", fmt_f64(kernel.h), points.len());
    Ok(())
}

fn cv(args: CvArgs) -> Result<()> {
    let cfg = config_for(&args.data, Some(&args.kernel))?;
    let s = Session::open(&args.data.manifest, &cfg)?;
    let result = s.cv(&cfg)?;
    emit(args.data.out.as_deref(), &cv_table(&result).render())
}

fn predict(args: PredictArgs) -> Result<()> {
    let cfg = config_for(&args.data, Some(&args.kernel))?;
    let s = Session::open(&args.data.manifest, &cfg)?;
    let (kernel, _) = s.kernel(&cfg)?;
    let at: Vec<Vec<f64>> = args.at.into_iter().map(|p| p.0).collect();
    let fitted = predict_points(&s, &kernel, &at)?;
    let text: Vec<String> = fitted.iter().map(|l| format_matrix(l.matrix())).collect();
    emit(args.data.out.as_deref(), &text.join("\n"))
}

fn reverse_predict(args: ReverseArgs) -> Result<()> {
    let cfg = config_for(&args.data, Some(&args.kernel))?;
    let s = Session::open(&args.data.manifest, &cfg)?;
    let (kernel, _) = s.kernel(&cfg)?;
    let net = align_network(
        load_network(&args.network)?,
        &s.loaded.node_labels,
        &args.network,
    )?;
    let mut l = laplacian_from_network(&net);
    if s.loaded.normalization == Normalization::Trace {
        l = trace_normalize(&l)?;
    }
    let mut x = ReverseNw::new(&s.data, s.power)?.predict(&l, &kernel)?;
    if let Some(t) = &s.standardization {
        x = x
            .iter()
            .enumerate()
            .map(|(d, v)| v * t.sd[d] + t.mean[d])
            .collect();
    }
    let mut table = Table::new(s.covariate_names().to_vec());
    table.push(x.iter().map(|&v| fmt_f64(v)).collect());
    emit(args.data.out.as_deref(), &table.render())
}

fn pca(args: PcaArgs) -> Result<()> {
    let cfg = config_for(&args.data, None)?;
    let s = Session::open(&args.data.manifest, &cfg)?;
    let model = s.model()?;
    let pca = pca_fit(model.tangents())?;
    let table = if args.variance {
        pca_variance_table(&pca)
    } else {
        let k = args.components.min(pca.components.len());
        let scores = pca_project(&pca, model.tangents(), k)?;
        scores_table(
            s.data.labels(),
            s.raw_covariates(),
            s.covariate_names(),
            &scores,
            "pc",
        )
    };
    emit(args.data.out.as_deref(), &table.render())
}

fn mds(args: MdsArgs) -> Result<()> {
    let mut cfg = config_for(&args.data, None)?;
    apply_rho(&mut cfg, &args.rho);
    cfg.validate()?;
    let s = Session::open(&args.data.manifest, &cfg)?;
    let rho = match cfg.rho_method {
        RhoMethod::Fixed => cfg.rho_fixed.expect("validated"),
        RhoMethod::Ls => estimate_rho_ls(s.model()?.tangents())?.rho,
        RhoMethod::Pc1grid => estimate_rho_pc1(&s.data, &Session::rho_grid(&cfg), &s.power)?.rho,
    };
    let d = mahalanobis_distance_matrix(&s.data, rho, &s.power)?;
    let result = classical_mds(&d, args.dims)?;
    let (coords, eig) = mds_tables(&result, &s.data, s.raw_covariates(), s.covariate_names());
    eprintln!("rho={}", fmt_f64(rho));
    emit(
        args.data.out.as_deref(),
        &if args.eigenvalues { eig } else { coords }.render(),
    )
}

fn residuals(args: ResidualsArgs) -> Result<()> {
    let cfg = config_for(&args.data, Some(&args.kernel))?;
    let s = Session::open(&args.data.manifest, &cfg)?;
    let (kernel, _) = s.kernel(&cfg)?;
    let model = s.model()?;
    let fit = fit_curve_with(&model, s.data.covariates(), &kernel)
        .map_err(|e| e.in_stage("residuals"))?;
    let series = residual_distances(&s.data, &fit, &s.power)?;
    let table = match args.top_k {
        Some(k) => anomaly_table(&rank_anomalies(&series, k.min(series.len()))?),
        None => series_table(&series, &s.data, s.raw_covariates(), s.covariate_names()),
    };
    emit(args.data.out.as_deref(), &table.render())
}

fn run(args: RunArgs) -> Result<()> {
    if let Some(meta) = &args.rerun {
        let out = args
            .output_dir
            .clone()
            .ok_or_else(|| Error::InvalidParameter("--rerun needs --output-dir".into()))?;
        let summary = rerun(meta, out)?;
        println!("rerun written to {}", summary.output_dir.display());
        return Ok(());
    }
    let mut cfg = base_config(args.config.as_deref())?;
    let data = DataArgs {
        manifest: PathBuf::new(),
        config: None,
        alpha: args.alpha,
        eigenvalue_floor: args.eigenvalue_floor,
        standardize: args.standardize,
        projection_tol: args.projection_tol,
        projection_max_iter: args.projection_max_iter,
        out: None,
    };
    apply_data(&mut cfg, &data);
    apply_kernel(&mut cfg, &args.kernel);
    apply_rho(&mut cfg, &args.rho);
    if let Some(q) = &args.query_grid {
        cfg.query_grid = parse_query_grid(q)?;
    }
    if let Some(k) = args.top_k {
        cfg.top_k = k;
    }
    if args.output_dir.is_some() {
        cfg.output_dir = args.output_dir.clone();
    }
    cfg.validate()?;
    let manifest = args.manifest.expect("required by clap");
    let summary = run_pipeline(&cfg, &manifest)?;
    let m = &summary.metadata;
    println!("output: {}", summary.output_dir.display());
    println!(
        "alpha={} h={} rho={}",
        fmt_f64(m.alpha),
        fmt_f64(m.h),
        fmt_f64(m.rho)
    );
    for (r, a) in summary.anomalies.top.iter().enumerate() {
        println!(
            "{}. {} residual={}{}",
            r + 1,
            a.label,
            fmt_f64(a.score),
            if a.flagged { " *" } else { "" }
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Validate(a) => validate(a),
        Command::Distances(a) => distances(a),
        Command::Fit(a) => fit(a),
        Command::Cv(a) => cv(a),
        Command::Predict(a) => predict(a),
        Command::ReversePredict(a) => reverse_predict(a),
        Command::Pca(a) => pca(a),
        Command::Mds(a) => mds(a),
        Command::Residuals(a) => residuals(a),
        Command::Run(a) => run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
