use std::fs;
use std::path::Path;

use serde::Deserialize;
use serde_json::json;

use nwbeam_core::metrics::{evaluate, to_jsonl, Metric};
use nwbeam_core::pipeline::{oracle_budget, Budget, NwfInit};
use nwbeam_core::simulate::{generate_dataset, SceneConfig, MANIFEST_FILE};
use nwbeam_core::wav::{read_wav, write_wav};
use nwbeam_core::{enhance as run_pipeline, oracle_enhance, pipeline_budget, Bundle, Pipeline, PipelineMode, Signal, TensorContainer, Wiener};

use crate::fail::{CliResult, Failure, WithPath};

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn parse_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    toml::from_str(&read_text(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_bundle(path: &Path) -> CliResult<Bundle> {
    let container = TensorContainer::load(path).at(path)?;
    Bundle::from_container(&container).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn ms(samples: usize, fs: u32) -> f64 {
    samples as f64 * 1000.0 / fs as f64
}

pub fn simulate(config: Option<&Path>, count: usize, seed: u64, out_dir: &Path) -> CliResult {
    let cfg: SceneConfig = match config {
        Some(p) => parse_toml(p)?,
        None => SceneConfig::default(),
    };
    cfg.validate()?;
    let records = generate_dataset(&cfg, count, seed, out_dir)?;
    println!("wrote {} utterances to {}", records.len(), out_dir.join(MANIFEST_FILE).display());
    Ok(())
}

pub struct EnhanceArgs<'a> {
    pub model: &'a Path,
    pub mode: Option<PipelineMode>,
    pub wiener: Wiener,
    pub iterations: usize,
    pub input: &'a Path,
    pub target: Option<&'a Path>,
    pub output: &'a Path,
}

pub fn enhance(args: &EnhanceArgs) -> CliResult {
    let bundle = load_bundle(args.model)?;
    let mode = args.mode.unwrap_or(bundle.mode);
    if mode == PipelineMode::OracleNwf && args.target.is_none() {
        return Err(Failure::usage("oracle-nwf needs --target"));
    }
    let noisy: Signal = read_wav(args.input).at(args.input)?;
    if noisy.sample_rate() != bundle.sample_rate {
        return Err(Failure::mismatch(format!(
            "input is {} Hz, model expects {} Hz",
            noisy.sample_rate(),
            bundle.sample_rate
        )));
    }
    let fs = bundle.sample_rate;

    let (output, latencies, total) = if mode == PipelineMode::OracleNwf {
        let stage = bundle.nwf.as_ref().ok_or_else(|| Failure::usage("model has no nwf stage"))?;
        let path = args.target.expect("checked above");
        let target: Signal = read_wav(path).at(path)?;
        if target.len() != noisy.len() || target.sample_rate() != fs {
            return Err(Failure::mismatch(format!(
                "target has {} samples at {} Hz, input has {} at {fs} Hz",
                target.len(),
                target.sample_rate(),
                noisy.len()
            )));
        }
        let clean = Signal::mono(fs, target.channel(0).to_vec())?;
        let out = oracle_enhance(&noisy, &clean, stage, args.wiener)?;
        let lat = stage.frame.latency();
        (out, vec![lat], lat)
    } else {
        let mut cfg = Pipeline::from_bundle(mode, &bundle, args.wiener)?;
        cfg.iterations = args.iterations;
        cfg.validate()?;
        let outs = run_pipeline(&noisy, &cfg, &bundle)?;
        let lats = outs.latencies.iter().map(|&(_, l)| l).collect();
        (outs.final_output().clone(), lats, outs.latency)
    };
    let per_stage: Vec<String> = latencies.iter().map(|&l| ms(l, fs).to_string()).collect();
    println!("latency {} ms", per_stage.join("/"));
    println!("end-to-end latency {} ms ({total} samples)", ms(total, fs));
    write_wav(args.output, &output).at(args.output)?;
    println!("wrote {} ({} samples)", args.output.display(), output.len());
    Ok(())
}

pub fn eval(reference: &Path, est: &Path, names: &[String], id: Option<String>, report: Option<&Path>) -> CliResult {
    let metrics = names
        .iter()
        .map(|n| {
            Metric::parse(n.trim()).ok_or_else(|| {
                let known: Vec<_> = Metric::ALL.iter().map(|m| m.as_str()).collect();
                Failure::usage(format!("unknown metric {n:?}; expected {}", known.join(", ")))
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let r: Signal = read_wav(reference).at(reference)?;
    let e: Signal = read_wav(est).at(est)?;
    if r.len() != e.len() {
        return Err(Failure::mismatch(format!("reference has {} samples, estimate {}", r.len(), e.len())));
    }
    if r.sample_rate() != e.sample_rate() {
        return Err(Failure::mismatch(format!(
            "reference is {} Hz, estimate {} Hz",
            r.sample_rate(),
            e.sample_rate()
        )));
    }
    let id = id.unwrap_or_else(|| est.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    let record = evaluate(id, r.channel(0), e.channel(0), r.sample_rate(), &metrics)?;
    let line = to_jsonl(std::slice::from_ref(&record));
    print!("{line}");
    if let Some(path) = report {
        fs::write(path, &line).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

pub fn inspect(path: &Path, wiener: Wiener, channels: usize, as_json: bool) -> CliResult {
    let container = TensorContainer::load(path).at(path)?;
    let bundle = Bundle::from_container(&container).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    let fs = bundle.sample_rate;
    let budget: Budget = if bundle.mode == PipelineMode::OracleNwf {
        let nwf = bundle.nwf.as_ref().ok_or_else(|| Failure::io("oracle model without nwf stage"))?;
        oracle_budget(&nwf.config(), channels, &wiener, fs)
    } else {
        let cfg = Pipeline::from_bundle(bundle.mode, &bundle, wiener).map_err(|e| Failure::io(e.to_string()))?;
        pipeline_budget(&cfg)?
    };

    if as_json {
        let stages: Vec<_> = budget
            .stages
            .iter()
            .map(|s| {
                json!({
                    "name": s.name,
                    "params": s.params,
                    "gflops": s.flops / 1e9,
                    "latency_samples": s.latency_samples,
                    "latency_ms": ms(s.latency_samples, fs),
                })
            })
            .collect();
        let tensors: Vec<_> = container.tensors.iter().map(|t| json!({"name": t.name, "shape": t.shape})).collect();
        let doc = json!({
            "mode": bundle.mode.as_str(),
            "fs": fs,
            "params": budget.params,
            "gflops": budget.flops / 1e9,
            "latency_samples": budget.latency_samples,
            "latency_ms": budget.latency_ms,
            "stages": stages,
            "tensors": tensors,
            "metadata": container.metadata,
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("json values serialize"));
        return Ok(());
    }

    println!("model {} (mode {}, {fs} Hz)", path.display(), bundle.mode.as_str());
    println!("{:<6} {:>10} {:>10} {:>10}", "stage", "params", "GFLOPs/s", "latency");
    for s in &budget.stages {
        println!(
            "{:<6} {:>10} {:>10.3} {:>7} ms",
            s.name,
            s.params,
            s.flops / 1e9,
            ms(s.latency_samples, fs)
        );
    }
    println!(
        "total params {:.2}M ({}), {:.3} GFLOPs/s, latency {} ms",
        budget.params as f64 / 1e6,
        budget.params,
        budget.flops / 1e9,
        budget.latency_ms
    );
    println!("tensors");
    for t in &container.tensors {
        println!("  {} {:?}", t.name, t.shape);
    }
    Ok(())
}

/// Stage geometry for `init`; keys follow the usual symbols.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Arch {
    mode: String,
    #[serde(rename = "M", default = "Arch::mics")]
    mics: usize,
    #[serde(rename = "H", default = "Arch::hidden")]
    hidden: usize,
    #[serde(default = "Arch::blocks")]
    blocks: usize,
    #[serde(rename = "iW", default = "Arch::input_frame")]
    input_frame: usize,
    #[serde(rename = "J", default = "Arch::hop")]
    hop: usize,
    #[serde(rename = "oW", default = "Arch::output_frame")]
    output_frame: usize,
    #[serde(default = "Arch::fs")]
    fs: u32,
}

impl Arch {
    fn mics() -> usize {
        8
    }
    fn hidden() -> usize {
        128
    }
    fn blocks() -> usize {
        2
    }
    fn input_frame() -> usize {
        256
    }
    fn hop() -> usize {
        16
    }
    fn output_frame() -> usize {
        32
    }
    fn fs() -> u32 {
        16_000
    }
}

pub fn init(arch_path: &Path, seed: u64, out: &Path, nwf: NwfInit) -> CliResult {
    let arch: Arch = parse_toml(arch_path)?;
    let mode = PipelineMode::parse(&arch.mode).ok_or_else(|| Failure::usage(format!("unknown mode {:?}", arch.mode)))?;
    let mut cfg = Pipeline::with_geometry(
        mode,
        arch.mics,
        arch.hidden,
        arch.blocks,
        arch.input_frame,
        arch.hop,
        arch.output_frame,
    );
    if arch.fs == 0 {
        return Err(Failure::usage("fs must be positive"));
    }
    cfg.sample_rate = arch.fs;
    let bundle = Bundle::init(&cfg, nwf, seed).map_err(|e| Failure::usage(e.to_string()))?;
    bundle.to_container().save(out).at(out)?;
    println!("wrote {} ({} mode, seed {seed})", out.display(), mode.as_str());
    Ok(())
}
