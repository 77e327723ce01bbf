//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::dictionary::{
    build_dictionary, format_seeds, linspace, load_seeds, synthetic_seeds, BroadcastRig, Dictionary, PtzGrid,
    Raster,
};
use crate::edgemap::EdgeMap;
use crate::error::{Error, Result};
use crate::evalharness::{
    config_fingerprint, format_table, load_testset, make_synthetic_testset, noise_sweep, report_csv, save_testset,
};
use crate::features::HogConfig;
use crate::matcher::{register_frame, CandidateSet, Metric};
use crate::pitch_model::{standard_pitch, PitchModel};
use crate::preprocess::{draw_overlay, field_mask, stroke_filtered_edges, PreprocessConfig, RgbFrame};
use crate::temporal::{
    camera_path_to_homographies, fill_gaps, mrf_smooth, stabilize, CameraParams, SmoothingWeights,
};

#[derive(Debug, Parser)]
#[command(name = "pitchreg", version, about = "Register football broadcast frames to a top-view pitch model")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample seed annotations from a simulated broadcast camera.
    SynthSeeds(SynthSeedsArgs),
    /// Expand seed annotations into a dictionary file.
    BuildDict(BuildDictArgs),
    /// Generate a held-out synthetic test set.
    MakeTestset(MakeTestsetArgs),
    /// Register individual frames or edge maps.
    Register(RegisterArgs),
    /// Register a frame sequence with temporal smoothing and stabilization.
    RegisterVideo(RegisterVideoArgs),
    /// Evaluate a dictionary on a test set.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Pan range in radians (steps span ±range).
    #[arg(long, default_value_t = 0.35)]
    pub pan_range: f64,
    #[arg(long, default_value_t = 21)]
    pub pan_steps: usize,
    /// Tilt range in meters (steps span ±range).
    #[arg(long, default_value_t = 12.0)]
    pub tilt_range: f64,
    #[arg(long, default_value_t = 9)]
    pub tilt_steps: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.7,0.85,1.0,1.2,1.45")]
    pub zooms: Vec<f64>,
}

impl GridArgs {
    pub fn grid(&self) -> PtzGrid {
        PtzGrid {
            pan_steps: linspace(-self.pan_range, self.pan_range, self.pan_steps),
            tilt_steps: linspace(-self.tilt_range, self.tilt_range, self.tilt_steps),
            zoom_factors: self.zooms.clone(),
        }
    }

    fn fields(&self) -> Vec<(&'static str, String)> {
        vec![
            ("pan_range", self.pan_range.to_string()),
            ("pan_steps", self.pan_steps.to_string()),
            ("tilt_range", self.tilt_range.to_string()),
            ("tilt_steps", self.tilt_steps.to_string()),
            ("zooms", format!("{:?}", self.zooms)),
        ]
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Pitch model file; the standard 105 x 68 m pitch when omitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

impl ModelArgs {
    fn load(&self) -> Result<PitchModel> {
        match &self.model {
            Some(p) => PitchModel::load(p, 1.0),
            None => standard_pitch(1.0),
        }
    }

    fn fields(&self) -> Vec<(&'static str, String)> {
        vec![(
            "model",
            self.model.as_ref().map_or("standard".into(), |p| p.display().to_string()),
        )]
    }
}

#[derive(Debug, Args)]
pub struct SynthSeedsArgs {
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub rng_seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct BuildDictArgs {
    #[arg(long)]
    pub seeds: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Dilate and blur edge maps before HOG gradients.
    #[arg(long, default_value = "on", value_parser = ["on", "off"])]
    pub hog_blur: String,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct MakeTestsetArgs {
    /// Seeds the queries are generated from.
    #[arg(long)]
    pub seeds: PathBuf,
    /// Seeds the dictionary was built from; test seeds must differ.
    #[arg(long)]
    pub dict_seeds: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 7)]
    pub rng_seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct MatchArgs {
    #[arg(long)]
    pub dict: PathBuf,
    #[arg(long, default_value = "hog", value_parser = ["chamfer", "hog"])]
    pub metric: String,
    #[arg(long, default_value_t = crate::matcher::DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
}

impl MatchArgs {
    fn metric(&self) -> Metric {
        self.metric.parse().expect("validated by clap")
    }

    fn fields(&self, dict: &Dictionary) -> Vec<(&'static str, String)> {
        vec![
            ("dict", self.dict.display().to_string()),
            ("dict_entries", dict.len().to_string()),
            ("dict_scales", format!("{:?}", dict.scales)),
            ("metric", self.metric.clone()),
            ("k", self.k.to_string()),
            ("eps", self.eps.to_string()),
        ]
    }
}

#[derive(Debug, Clone, Args)]
pub struct PreprocessArgs {
    #[arg(long, default_value_t = 70.0)]
    pub hue_lo: f64,
    #[arg(long, default_value_t = 170.0)]
    pub hue_hi: f64,
    #[arg(long, default_value_t = 0.3)]
    pub min_field_fraction: f64,
    #[arg(long, default_value_t = 10)]
    pub max_stroke_px: usize,
    #[arg(long, default_value_t = 0.15)]
    pub gradient_threshold: f64,
    /// Directory for the edge maps actually matched (PBM).
    #[arg(long)]
    pub dump_edges: Option<PathBuf>,
    /// Directory for PNG overlays of the registered model lines.
    #[arg(long)]
    pub overlay: Option<PathBuf>,
}

impl PreprocessArgs {
    fn config(&self, raster: Raster) -> PreprocessConfig {
        PreprocessConfig {
            hue_window: [self.hue_lo, self.hue_hi],
            min_field_fraction: self.min_field_fraction,
            max_stroke_px: self.max_stroke_px,
            gradient_threshold: self.gradient_threshold,
            raster,
        }
    }

    fn fields(&self) -> Vec<(&'static str, String)> {
        vec![
            ("hue_window", format!("{},{}", self.hue_lo, self.hue_hi)),
            ("min_field_fraction", self.min_field_fraction.to_string()),
            ("max_stroke_px", self.max_stroke_px.to_string()),
            ("gradient_threshold", self.gradient_threshold.to_string()),
        ]
    }
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    /// Edge maps (.pbm, used as-is) or frames (.png/.ppm, preprocessed).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub matching: MatchArgs,
    #[command(flatten)]
    pub preprocess: PreprocessArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct RegisterVideoArgs {
    /// Directory of frames or edge maps, processed in file-name order.
    #[arg(long)]
    pub frames: PathBuf,
    /// Optional list of frame file names to keep, one per line.
    #[arg(long)]
    pub include: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub lambda1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda2: f64,
    #[arg(long, default_value_t = 10.0)]
    pub lambda3: f64,
    #[arg(long, default_value_t = 1.0)]
    pub w_smooth: f64,
    #[command(flatten)]
    pub matching: MatchArgs,
    #[command(flatten)]
    pub preprocess: PreprocessArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory written by `make-testset`.
    #[arg(long)]
    pub testset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub dropout: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub salt: Vec<f64>,
    #[arg(long, default_value_t = 11)]
    pub rng_seed: u64,
    #[command(flatten)]
    pub matching: MatchArgs,
}

/// Exit status for a failed command: 2 for usage and I/O problems, 1 for
/// everything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_)
        | Error::MissingFile(_)
        | Error::Parse { .. }
        | Error::Format(_)
        | Error::Image(_)
        | Error::InvalidConfig(_)
        | Error::InvalidGrid(_)
        | Error::InvalidK => 2,
        _ => 1,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    // a second in-process run keeps the first logger
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::SynthSeeds(a) => cmd_synth_seeds(a),
        Command::BuildDict(a) => cmd_build_dict(a),
        Command::MakeTestset(a) => cmd_make_testset(a),
        Command::Register(a) => cmd_register(a),
        Command::RegisterVideo(a) => cmd_register_video(a),
        Command::Eval(a) => cmd_eval(a),
    }
}

fn header(fingerprint: &str, fields: &[(&str, String)]) -> String {
    let mut s = format!("# fingerprint {fingerprint}\n");
    for (k, v) in fields {
        let _ = writeln!(s, "# {k}={v}");
    }
    s
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingFile(path.to_path_buf()))
    }
}

fn cmd_synth_seeds(a: &SynthSeedsArgs) -> Result<i32> {
    let model = a.model.load()?;
    let seeds = synthetic_seeds(a.n, a.rng_seed, &BroadcastRig::default(), &model, Raster::default())?;
    let mut fields = vec![("command", "synth-seeds".to_string()), ("n", a.n.to_string()), ("rng_seed", a.rng_seed.to_string())];
    fields.extend(a.model.fields());
    let fp = config_fingerprint(&fields);
    std::fs::write(&a.out, header(&fp, &fields) + &format_seeds(&seeds))?;
    println!("wrote {} seeds to {}", seeds.len(), a.out.display());
    Ok(0)
}

pub fn cmd_build_dict(a: &BuildDictArgs) -> Result<i32> {
    let seeds = load_seeds(&a.seeds)?;
    let model = a.model.load()?;
    let grid = a.grid.grid();
    let raster = Raster::default();
    let hog_cfg = HogConfig {
        blur: a.hog_blur == "on",
        ..HogConfig::default()
    };
    let dict = build_dictionary(&seeds, &grid, &model, raster, &hog_cfg)?;
    let mut fields = vec![
        ("command", "build-dict".to_string()),
        ("seeds", a.seeds.display().to_string()),
        ("seed_text", format_seeds(&seeds)),
        ("hog_blur", a.hog_blur.clone()),
    ];
    fields.extend(a.grid.fields());
    fields.extend(a.model.fields());
    let fp = config_fingerprint(&fields);
    dict.save(&a.out)?;
    let meta = header(&fp, &fields[..2])
        + &format!(
            "# grid_points={}\n# entries={}\n",
            seeds.len() * grid.len(),
            dict.len()
        );
    std::fs::write(meta_path(&a.out), meta)?;
    println!(
        "{} entries ({} of {} grid points rejected)",
        dict.len(),
        seeds.len() * grid.len() - dict.len(),
        seeds.len() * grid.len()
    );
    Ok(0)
}

/// Sidecar file holding the fingerprint of a binary output.
pub fn meta_path(p: &Path) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn cmd_make_testset(a: &MakeTestsetArgs) -> Result<i32> {
    let seeds = load_seeds(&a.seeds)?;
    let dict_seeds = load_seeds(&a.dict_seeds)?;
    let model = a.model.load()?;
    let q = make_synthetic_testset(&seeds, &dict_seeds, &a.grid.grid(), a.n, a.rng_seed, &model, Raster::default())?;
    save_testset(&a.out, &q)?;
    println!("wrote {} queries to {}", q.len(), a.out.display());
    Ok(0)
}

fn load_dict(path: &Path) -> Result<Dictionary> {
    require(path)?;
    let d = Dictionary::load(path)?;
    log::info!("loaded {} dictionary entries", d.len());
    Ok(d)
}

enum Input {
    Edges(EdgeMap),
    Frame(RgbFrame),
}

fn frame_id(p: &Path) -> String {
    p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn is_edge_file(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pbm"))
}

fn load_input(p: &Path) -> Result<Input> {
    require(p)?;
    if is_edge_file(p) {
        Ok(Input::Edges(EdgeMap::load_pbm(p)?))
    } else {
        Ok(Input::Frame(RgbFrame::load(p)?))
    }
}

struct FrameResult {
    id: String,
    candidates: Result<CandidateSet>,
}

/// Loads, preprocesses and matches one input; the edge map and overlay are
/// written when requested.
fn process_input(path: &Path, dict: &Dictionary, m: &MatchArgs, pre: &PreprocessArgs, model: &PitchModel) -> FrameResult {
    let id = frame_id(path);
    let run = || -> Result<CandidateSet> {
        let input = load_input(path)?;
        let edges = match &input {
            Input::Edges(e) => e.clone(),
            Input::Frame(f) => {
                let cfg = pre.config(dict.raster);
                let mask = field_mask(f, &cfg)?;
                stroke_filtered_edges(f, &mask.mask, &cfg)?
            }
        };
        if let Some(dir) = &pre.dump_edges {
            edges.save_pbm(&dir.join(format!("{id}.pbm")))?;
        }
        let c = register_frame(&id, &edges, dict, m.metric(), m.k, m.eps)?;
        if let (Some(dir), Some(best)) = (&pre.overlay, c.best()) {
            let base = match input {
                Input::Frame(f) => f,
                Input::Edges(e) => {
                    let mut f = RgbFrame::filled(e.width(), e.height(), [0, 0, 0])?;
                    for (x, y) in e.iter_set_xy() {
                        f.set(x, y, [255, 255, 255]);
                    }
                    f
                }
            };
            let h = &dict.entries[best.entry_index].h;
            draw_overlay(&base, model, h, dict.raster)?.save_png(&dir.join(format!("{id}.png")))?;
        }
        Ok(c)
    };
    let candidates = run();
    FrameResult { id, candidates }
}

fn register_all(paths: &[PathBuf], dict: &Dictionary, m: &MatchArgs, pre: &PreprocessArgs, model: &PitchModel) -> Result<Vec<FrameResult>> {
    if m.k == 0 {
        return Err(Error::InvalidK);
    }
    for dir in [&pre.dump_edges, &pre.overlay].into_iter().flatten() {
        std::fs::create_dir_all(dir)?;
    }
    let results: Vec<FrameResult> = paths.par_iter().map(|p| process_input(p, dict, m, pre, model)).collect();
    for r in &results {
        if let Err(e) = &r.candidates {
            log::warn!("frame {}: {e}", r.id);
        }
    }
    Ok(results)
}

fn candidate_lines(results: &[FrameResult], dict: &Dictionary) -> String {
    let mut s = String::new();
    for r in results {
        match &r.candidates {
            Ok(c) => {
                for (rank, cand) in c.candidates.iter().enumerate() {
                    let _ = writeln!(
                        s,
                        "{} {} {} {} {}",
                        r.id,
                        rank + 1,
                        cand.entry_index,
                        cand.distance,
                        dict.entries[cand.entry_index].h
                    );
                }
            }
            Err(e) => {
                let _ = writeln!(s, "# {} failed: {e}", r.id);
            }
        }
    }
    s
}

pub fn cmd_register(a: &RegisterArgs) -> Result<i32> {
    let dict = load_dict(&a.matching.dict)?;
    let model = a.model.load()?;
    for p in &a.inputs {
        require(p)?;
    }
    std::fs::create_dir_all(&a.out)?;
    let results = register_all(&a.inputs, &dict, &a.matching, &a.preprocess, &model)?;
    let mut fields = vec![("command", "register".to_string())];
    fields.extend(a.matching.fields(&dict));
    fields.extend(a.preprocess.fields());
    fields.extend(a.model.fields());
    let fp = config_fingerprint(&fields);
    let head = header(&fp, &fields);
    std::fs::write(a.out.join("candidates.txt"), head.clone() + &candidate_lines(&results, &dict))?;
    let mut hs = String::new();
    for r in &results {
        if let Ok(c) = &r.candidates {
            if let Some(b) = c.best() {
                let _ = writeln!(hs, "{} {}", r.id, dict.entries[b.entry_index].h);
            }
        }
    }
    std::fs::write(a.out.join("homographies.txt"), head + &hs)?;
    let failed = results.iter().filter(|r| r.candidates.is_err()).count();
    println!("registered {} of {} inputs", results.len() - failed, results.len());
    Ok(if failed == 0 { 0 } else { 1 })
}

fn list_frames(dir: &Path, include: Option<&Path>) -> Result<Vec<PathBuf>> {
    require(dir)?;
    let keep: Option<Vec<String>> = match include {
        Some(p) => {
            require(p)?;
            Some(
                std::fs::read_to_string(p)?
                    .lines()
                    .map(|l| l.trim().to_string())
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .collect(),
            )
        }
        None => None,
    };
    let mut frames: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| {
                let e = e.to_string_lossy().to_ascii_lowercase();
                e == "pbm" || e == "png" || e == "ppm"
            })
        })
        .filter(|p| {
            keep.as_ref().is_none_or(|k| {
                let name = p.file_name().unwrap_or_default().to_string_lossy();
                k.iter().any(|x| *x == name)
            })
        })
        .collect();
    frames.sort();
    Ok(frames)
}

fn trajectory_csv(head: &str, ids: &[String], params: &[CameraParams], flags: &[bool]) -> String {
    let mut s = head.to_string();
    s += "frame,cx,cy,theta,phi,r1,r2,interpolated\n";
    for ((id, p), f) in ids.iter().zip(params).zip(flags) {
        let _ = writeln!(s, "{id},{},{},{},{},{},{},{}", p.cx, p.cy, p.theta, p.phi, p.r1, p.r2, *f as u8);
    }
    s
}

pub fn cmd_register_video(a: &RegisterVideoArgs) -> Result<i32> {
    let dict = load_dict(&a.matching.dict)?;
    let model = a.model.load()?;
    let weights = SmoothingWeights {
        lambda1: a.lambda1,
        lambda2: a.lambda2,
        lambda3: a.lambda3,
        ..SmoothingWeights::default()
    };
    weights.validate()?;
    let frames = list_frames(&a.frames, a.include.as_deref())?;
    if frames.is_empty() {
        return Err(Error::InvalidConfig(format!("no frames in {}", a.frames.display())));
    }
    std::fs::create_dir_all(&a.out)?;
    let results = register_all(&frames, &dict, &a.matching, &a.preprocess, &model)?;

    let mut fields = vec![("command", "register-video".to_string())];
    fields.extend(a.matching.fields(&dict));
    fields.extend(a.preprocess.fields());
    fields.extend(a.model.fields());
    fields.extend([
        ("lambda1", a.lambda1.to_string()),
        ("lambda2", a.lambda2.to_string()),
        ("lambda3", a.lambda3.to_string()),
        ("param_scales", format!("{:?}", weights.param_scales)),
        ("w_smooth", a.w_smooth.to_string()),
        ("frames", frames.iter().map(|p| frame_id(p)).collect::<Vec<_>>().join(",")),
    ]);
    let fp = config_fingerprint(&fields);
    let head = header(&fp, &fields);
    std::fs::write(a.out.join("candidates.txt"), head.clone() + &candidate_lines(&results, &dict))?;

    let ids: Vec<String> = results.iter().map(|r| r.id.clone()).collect();
    let ok: Vec<(usize, &CandidateSet)> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.candidates.as_ref().ok().map(|c| (i, c)))
        .filter(|(_, c)| !c.candidates.is_empty())
        .collect();
    if ok.is_empty() {
        eprintln!("error: no frame could be registered");
        return Ok(1);
    }
    let sets: Vec<CandidateSet> = ok.iter().map(|(_, c)| (*c).clone()).collect();
    let path = mrf_smooth(&sets, &dict, a.w_smooth)?;
    let mut raw: Vec<Option<CameraParams>> = vec![None; results.len()];
    let mut selected = String::new();
    for ((i, c), s) in ok.iter().zip(&path.states) {
        let e = c.candidates[*s].entry_index;
        raw[*i] = Some(dict.entries[e].cam);
        let _ = writeln!(selected, "{} {} {}", ids[*i], s + 1, e);
    }
    std::fs::write(a.out.join("selected.txt"), head.clone() + &selected)?;
    let flags: Vec<bool> = raw.iter().map(Option::is_none).collect();
    let filled = fill_gaps(&raw).expect("at least one frame registered");
    let stabilized = if filled.len() < 4 {
        log::info!("{} frames: stabilization skipped", filled.len());
        filled.clone()
    } else {
        stabilize(&filled, &weights)?
    };
    std::fs::write(a.out.join("raw_trajectory.csv"), trajectory_csv(&head, &ids, &filled, &flags))?;
    std::fs::write(
        a.out.join("stabilized_trajectory.csv"),
        trajectory_csv(&head, &ids, &stabilized, &flags),
    )?;
    let hs = camera_path_to_homographies(&stabilized, dict.raster)?;
    let mut s = head;
    for ((id, h), f) in ids.iter().zip(&hs).zip(&flags) {
        let _ = writeln!(s, "{id} {h}{}", if *f { " # interpolated" } else { "" });
    }
    std::fs::write(a.out.join("homographies.txt"), s)?;
    let failed = flags.iter().filter(|f| **f).count();
    println!("registered {} frames, {} interpolated", ids.len() - failed, failed);
    Ok(if failed == 0 { 0 } else { 1 })
}

pub fn cmd_eval(a: &EvalArgs) -> Result<i32> {
    let dict = load_dict(&a.matching.dict)?;
    let queries = load_testset(&a.testset)?;
    let reports = noise_sweep(&queries, &dict, a.matching.metric(), a.matching.k, &a.dropout, &a.salt, a.rng_seed)?;
    std::fs::create_dir_all(&a.out)?;
    let table = format_table(&reports);
    let mut csv = String::new();
    for r in &reports {
        csv += &report_csv(r);
    }
    std::fs::write(a.out.join("report.csv"), csv)?;
    std::fs::write(a.out.join("table.txt"), &table)?;
    print!("{table}");
    Ok(if reports.iter().all(|r| r.failures.is_empty()) { 0 } else { 1 })
}
