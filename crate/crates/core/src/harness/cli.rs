use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use super::manifest::RunManifest;
use super::report::evaluate_population;
use crate::conditioner::{condition, ConditionerConfig, PropertyTarget};
use crate::generators::{
    load_weight_bundle, postprocess, GrfGenerator, GrfGeneratorConfig, LatentVector, NeuralBackend,
    NeuralGeneratorSpec, VolumeGenerator,
};
use crate::morphometrics::minkowski_report;
use crate::network::{extract_network, simulate_permeability, Domain, ExtractionParams, FlowAxis, FlowConfig};
use crate::volume::{crop_subvolumes, load_volume, save_volume, FormatHint, SubvolumeSpec, VoxelVolume};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "poromorph", version, about = "Generate, condition and analyze 3D porous microstructures")]
struct Cli {
    /// Worker threads for per-sample work.
    #[arg(long, env = "POROMORPH_JOBS", global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Crop a scan into overlapping cubic subvolumes.
    Ingest(IngestArgs),
    /// Draw samples from a generator.
    Generate(GenerateArgs),
    /// Porosity, specific surface area and Euler characteristic.
    Analyze(AnalyzeArgs),
    /// Extract a pore network.
    Network(NetworkArgs),
    /// Single-phase absolute permeability.
    Perm(PermArgs),
    /// Deform a latent vector until the generated sample matches a target.
    Condition(ConditionArgs),
    /// Population statistics over a set of volumes.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
struct VolumeInput {
    /// VVOL file, or a raw u8 file when --raw-dims is given.
    input: PathBuf,
    /// Dimensions of a headerless u8 file, as NX,NY,NZ.
    #[arg(long, value_delimiter = ',')]
    raw_dims: Option<Vec<usize>>,
    /// Voxel edge in micrometres for raw input.
    #[arg(long, default_value_t = crate::volume::DEFAULT_VOXEL_SIZE_UM)]
    raw_voxel_size: f64,
}

impl VolumeInput {
    fn load(&self) -> Result<VoxelVolume, CliError> {
        let hint = match self.raw_dims.as_deref() {
            None => None,
            Some(&[a, b, c]) => Some(FormatHint::RawU8 {
                dims: [a, b, c],
                voxel_size_um: self.raw_voxel_size,
            }),
            Some(_) => return Err(CliError::Usage("--raw-dims takes exactly three values".into())),
        };
        load_volume(&self.input, hint).map_err(data)
    }
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[command(flatten)]
    volume: VolumeInput,
    #[arg(long, default_value_t = 128)]
    size: usize,
    #[arg(long, default_value_t = 30)]
    stride: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Backend {
    Grf,
    Neural,
}

#[derive(Debug, Args, Serialize)]
struct GeneratorArgs {
    #[arg(long, value_enum, default_value_t = Backend::Grf)]
    backend: Backend,
    /// WB1 weight bundle (neural backend).
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Architecture JSON (neural backend); defaults to the full-size generator.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output edge in voxels (grf backend).
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Correlation length in voxels (grf backend).
    #[arg(long, default_value_t = 8.0)]
    correlation_length: f64,
    /// Field level separating solid from pore (grf backend).
    #[arg(long, default_value_t = 0.77, allow_negative_numbers = true)]
    threshold: f64,
    /// Latent dimension (grf backend).
    #[arg(long, default_value_t = 64)]
    modes: usize,
    #[arg(long, default_value_t = 0x5eed)]
    seed_spectrum: u64,
    #[arg(long, default_value_t = crate::volume::DEFAULT_VOXEL_SIZE_UM)]
    voxel_size: f64,
}

impl GeneratorArgs {
    fn grf_config(&self) -> GrfGeneratorConfig {
        GrfGeneratorConfig {
            size: self.size,
            correlation_length: self.correlation_length,
            threshold: self.threshold,
            mode_count: self.modes,
            seed_spectrum: self.seed_spectrum,
            voxel_size_um: self.voxel_size,
        }
    }

    fn neural(&self, manifest: &mut RunManifest) -> Result<NeuralBackend, CliError> {
        let weights = self
            .weights
            .as_ref()
            .ok_or_else(|| CliError::Usage("--backend neural requires --weights".into()))?;
        let spec = match &self.spec {
            Some(p) => {
                manifest.input(p);
                let text = fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?
            }
            None => NeuralGeneratorSpec::default(),
        };
        manifest.input(weights);
        let bundle = load_weight_bundle(weights).map_err(data)?;
        Ok(NeuralBackend::new(spec, Arc::new(bundle)).map_err(data)?.with_voxel_size(self.voxel_size))
    }

    fn build(&self, manifest: &mut RunManifest) -> Result<Box<dyn VolumeGenerator>, CliError> {
        Ok(match self.backend {
            Backend::Grf => Box::new(GrfGenerator::new(self.grf_config()).map_err(data)?),
            Backend::Neural => Box::new(self.neural(manifest)?),
        })
    }
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    /// Seed for the latent draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Median filter and Otsu-threshold the raw output.
    #[arg(long)]
    postprocess: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    volume: VolumeInput,
    /// Output JSON file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct NetworkArgs {
    #[command(flatten)]
    volume: VolumeInput,
    #[arg(long, default_value = "z")]
    axis: FlowAxis,
    #[arg(long, default_value_t = 0.4)]
    sigma: f64,
    #[arg(long, default_value_t = 4.0)]
    min_separation: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PermArgs {
    #[command(flatten)]
    volume: VolumeInput,
    #[arg(long, default_value = "z")]
    axis: FlowAxis,
    /// Pa·s
    #[arg(long, default_value_t = 1.0e-3)]
    viscosity: f64,
    /// Pa
    #[arg(long, default_value_t = 101_325.0)]
    delta_p: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ConditionArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    /// Target JSON: {"kind", "value", "units", "tolerance"}.
    #[arg(long)]
    target: PathBuf,
    /// Starting latent as a JSON array; drawn from --seed when absent.
    #[arg(long)]
    z0: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    #[arg(long, default_value_t = 8)]
    t_grid: usize,
    #[arg(long, default_value_t = 6)]
    refine_iters: usize,
    #[arg(long, default_value = "z")]
    axis: FlowAxis,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// VVOL files or directories of them.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value = "z")]
    axis: FlowAxis,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Data(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(data)?;
    text.push('\n');
    write_text(path, &text)
}

fn make_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

/// Manifest path for a single-file output: `<file>.manifest.json`.
fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn save(vol: &VoxelVolume, path: &Path, manifest: &mut RunManifest) -> Result<(), CliError> {
    save_volume(vol, path).map_err(data)?;
    manifest.output(path);
    Ok(())
}

fn run_ingest(a: IngestArgs, m: &mut RunManifest) -> Result<i32, CliError> {
    m.input(&a.volume.input);
    m.config = json!({ "size": a.size, "stride": a.stride, "raw_dims": a.volume.raw_dims });
    let vol = m.time("load", || a.volume.load())?;
    let spec = SubvolumeSpec {
        size: a.size,
        stride: a.stride,
    };
    let subs = m.time("crop", || crop_subvolumes(&vol, spec)).map_err(data)?;
    make_dir(&a.out)?;
    let origins = spec.origins(vol.dims());
    let mut entries = Vec::with_capacity(subs.len());
    for (i, (sub, origin)) in subs.iter().zip(&origins).enumerate() {
        let file = format!("sub_{i:05}.vvol");
        save(sub, &a.out.join(&file), m)?;
        entries.push(json!({ "file": file, "origin": origin }));
    }
    let index = a.out.join("ingest.json");
    write_json(
        &index,
        &json!({ "source": a.volume.input, "size": a.size, "stride": a.stride, "subvolumes": entries }),
    )?;
    m.output(&index);
    write_json(&a.out.join("manifest.json"), m)?;
    Ok(EXIT_OK)
}

fn run_generate(a: GenerateArgs, m: &mut RunManifest) -> Result<i32, CliError> {
    m.config = json!({ "generator": &a.generator, "count": a.count, "postprocess": a.postprocess });
    m.seeds.insert("latent".into(), a.seed);
    m.seeds.insert("spectrum".into(), a.generator.seed_spectrum);
    make_dir(&a.out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut latents = Vec::with_capacity(a.count);
    match a.generator.backend {
        Backend::Grf => {
            let g = GrfGenerator::new(a.generator.grf_config()).map_err(data)?;
            for i in 0..a.count {
                let z = LatentVector::sample(g.config().mode_count, &mut rng);
                let mut vol = m.time("generate", || g.generate(&z)).map_err(data)?;
                if a.postprocess {
                    vol = m.time("postprocess", || postprocess(&vol)).map_err(data)?;
                }
                save(&vol, &a.out.join(format!("sample_{i:04}.vvol")), m)?;
                latents.push(z);
            }
        }
        Backend::Neural => {
            let g = a.generator.neural(m)?;
            for i in 0..a.count {
                let z = LatentVector::sample(g.spec().latent_dim, &mut rng);
                let mut vol = m.time("generate", || g.generate_continuous(&z)).map_err(data)?;
                if a.postprocess {
                    vol = m.time("postprocess", || postprocess(&vol)).map_err(data)?;
                }
                save(&vol, &a.out.join(format!("sample_{i:04}.vvol")), m)?;
                latents.push(z);
            }
        }
    }
    let lat = a.out.join("latents.json");
    write_json(&lat, &latents)?;
    m.output(&lat);
    write_json(&a.out.join("manifest.json"), m)?;
    Ok(EXIT_OK)
}

fn run_analyze(a: AnalyzeArgs, m: &mut RunManifest) -> Result<i32, CliError> {
    m.input(&a.volume.input);
    let vol = m.time("load", || a.volume.load())?;
    let report = m.time("morphometrics", || minkowski_report(&vol)).map_err(data)?;
    write_json(&a.out, &report)?;
    m.output(&a.out);
    write_json(&sidecar(&a.out), m)?;
    Ok(EXIT_OK)
}

fn run_network(a: NetworkArgs, m: &mut RunManifest) -> Result<i32, CliError> {
    m.input(&a.volume.input);
    let params = ExtractionParams {
        smoothing_sigma: a.sigma,
        min_peak_separation: a.min_separation,
        axis: a.axis,
    };
    m.config = json!({ "extraction": params });
    let vol = m.time("load", || a.volume.load())?;
    let net = m.time("extract", || extract_network(&vol, &params)).map_err(data)?;
    write_json(&a.out, &net)?;
    m.output(&a.out);
    write_json(&sidecar(&a.out), m)?;
    Ok(EXIT_OK)
}

fn run_perm(a: PermArgs, m: &mut RunManifest) -> Result<i32, CliError> {
    m.input(&a.volume.input);
    let params = ExtractionParams {
        axis: a.axis,
        ..ExtractionParams::default()
    };
    let flow = FlowConfig {
        axis: a.axis,
        viscosity: a.viscosity,
        delta_p: a.delta_p,
    };
    m.config = json!({ "extraction": params, "flow": flow });
    let vol = m.time("load", || a.volume.load())?;
    let net = m.time("extract", || extract_network(&vol, &params)).map_err(data)?;
    let domain = Domain::from_volume(&vol, a.axis);
    let result = m.time("solve", || simulate_permeability(&net, &flow, domain)).map_err(data)?;
    write_json(&a.out, &result)?;
    m.output(&a.out);
    write_json(&sidecar(&a.out), m)?;
    Ok(EXIT_OK)
}

fn run_condition(a: ConditionArgs, m: &mut RunManifest) -> Result<i32, CliError> {
    m.input(&a.target);
    let text = fs::read_to_string(&a.target).map_err(|e| CliError::Data(format!("{}: {e}", a.target.display())))?;
    let target = PropertyTarget::from_json(&text).map_err(data)?;
    let config = ConditionerConfig {
        max_outer_iters: a.max_iters,
        t_grid: a.t_grid,
        refine_iters: a.refine_iters,
        rng_seed: a.seed,
        learning_rate: None,
        flow_axis: a.axis,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let z0 = match &a.z0 {
        Some(p) => {
            m.input(p);
            let text = fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            Some(serde_json::from_str::<Vec<f64>>(&text).map_err(data).and_then(|v| LatentVector::new(v).map_err(data))?)
        }
        None => None,
    };
    m.config = json!({ "generator": &a.generator, "conditioner": config, "target": target });
    m.seeds.insert("conditioner".into(), a.seed);
    m.seeds.insert("spectrum".into(), a.generator.seed_spectrum);
    let generator = a.generator.build(m)?;
    let result = m
        .time("condition", || condition(generator.as_ref(), &target, &config, z0))
        .map_err(data)?;
    make_dir(&a.out)?;
    let res_path = a.out.join("result.json");
    write_json(&res_path, &result)?;
    m.output(&res_path);
    save(&result.volume, &a.out.join("final.vvol"), m)?;
    write_json(&a.out.join("manifest.json"), m)?;
    Ok(if result.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "vvol"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn run_evaluate(a: EvaluateArgs, m: &mut RunManifest) -> Result<i32, CliError> {
    let files = collect_inputs(&a.inputs)?;
    if files.is_empty() {
        return Err(CliError::Data("no .vvol inputs found".into()));
    }
    m.config = json!({ "axis": a.axis });
    let mut samples = Vec::with_capacity(files.len());
    for f in &files {
        m.input(f);
        let vol = load_volume(f, None).map_err(|e| CliError::Data(format!("{}: {e}", f.display())))?;
        let id = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        samples.push((id, vol));
    }
    let report = m.time("evaluate", || evaluate_population(&samples, a.axis));
    make_dir(&a.out)?;
    let csv = a.out.join("report.csv");
    write_text(&csv, &report.to_csv())?;
    m.output(&csv);
    let js = a.out.join("report.json");
    write_json(&js, &report)?;
    m.output(&js);
    write_json(&a.out.join("manifest.json"), m)?;
    Ok(EXIT_OK)
}

fn run(cli: Cli, argv: &[String]) -> Result<i32, CliError> {
    let name = match &cli.command {
        Command::Ingest(_) => "ingest",
        Command::Generate(_) => "generate",
        Command::Analyze(_) => "analyze",
        Command::Network(_) => "network",
        Command::Perm(_) => "perm",
        Command::Condition(_) => "condition",
        Command::Evaluate(_) => "evaluate",
    };
    let mut m = RunManifest::new(name, argv);
    match cli.command {
        Command::Ingest(a) => run_ingest(a, &mut m),
        Command::Generate(a) => run_generate(a, &mut m),
        Command::Analyze(a) => run_analyze(a, &mut m),
        Command::Network(a) => run_network(a, &mut m),
        Command::Perm(a) => run_perm(a, &mut m),
        Command::Condition(a) => run_condition(a, &mut m),
        Command::Evaluate(a) => run_evaluate(a, &mut m),
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn cli_dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.jobs {
        Some(0) => Err(CliError::Usage("--jobs must be >= 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli, &argv)),
            Err(e) => Err(data(e)),
        },
        None => run(cli, &argv),
    };
    match outcome {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            EXIT_DATA
        }
    }
}
