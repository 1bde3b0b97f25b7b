//! Experiment runner CLI.
//!
//! Subcommands mirror the harness: `run` transmits frames and reports
//! quality, `sweep-eta` and `sweep-snr` drive the sweep experiments,
//! `fade-trace` records per-packet SNR under Rayleigh fading, and
//! `make-fixtures` writes a synthetic test sequence plus its ROI CSV.
//!
//! Settings resolve in three layers: built-in defaults, then an optional
//! `key = value` config file, then explicit flags. CSV goes to stdout
//! unless `--out DIR` is given, in which case CSV (and reconstructed
//! PGM frames for `run`) land in the directory.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 infeasible
//! configuration (power or bandwidth), 3 experiment anomaly.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use roicast::channel::ChannelKind;
use roicast::harness::{self, ExperimentConfig, Scheme};
use roicast::media_io::{self, PixelFormat};
use roicast::receiver::DecoderKind;
use roicast::sideinfo::McsTable;
use roicast::synth::SynthConfig;
use roicast::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "roicast",
    about = "ROI-aware pseudo-analog video transmission simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transmit frames end to end and report per-frame quality.
    Run(RunArgs),
    /// Sweep the preference parameter eta on one frame.
    SweepEta(SweepEtaArgs),
    /// Sweep channel SNR across schemes on one frame.
    SweepSnr(SweepSnrArgs),
    /// Rayleigh run with per-packet SNR and per-frame PSNR traces.
    FadeTrace(RunArgs),
    /// Generate the synthetic fixture sequence and its ROI CSV.
    MakeFixtures(MakeFixturesArgs),
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// Config file with `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Raw video file (luma-only or planar 4:2:0).
    #[arg(long)]
    video: Option<PathBuf>,
    /// Detector CSV `frame,x,y,w,h`.
    #[arg(long)]
    roi_csv: Option<PathBuf>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Input layout: yuv420 | luma.
    #[arg(long)]
    format: Option<String>,
    /// Reference frame index.
    #[arg(long)]
    reference: Option<usize>,
    /// Frames to transmit, comma separated.
    #[arg(long, value_delimiter = ',')]
    frames: Option<Vec<usize>>,
    /// softcast | kmvcast | roiccast | equal.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    eta: Option<f64>,
    /// Total frame power; derived from --snr-db when omitted.
    #[arg(long)]
    p_t: Option<f64>,
    #[arg(long)]
    sigma0_sq: Option<f64>,
    /// Channel SNR in dB (MCS selection and auto power).
    #[arg(long, allow_negative_numbers = true)]
    snr_db: Option<f64>,
    /// awgn | rayleigh.
    #[arg(long)]
    channel: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Symbols per fading packet.
    #[arg(long)]
    packet_len: Option<usize>,
    #[arg(long)]
    whitening: Option<bool>,
    #[arg(long)]
    ofdm: Option<bool>,
    /// Complex-symbol budget per frame; default covers the unpruned stream.
    #[arg(long)]
    symbol_budget: Option<usize>,
    /// zf | llse.
    #[arg(long)]
    decoder: Option<String>,
    #[arg(long)]
    match_radius: Option<usize>,
    /// Score from expected distortions instead of a noisy run.
    #[arg(long)]
    analytic: Option<bool>,
    /// CSV file mirroring the MCS table (`beta_db,cqi,modulation,ecr`).
    #[arg(long)]
    mcs_table: Option<PathBuf>,
    /// Output directory for CSV and PGM artifacts (default: CSV to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct SweepEtaArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Eta values, comma separated.
    #[arg(long, value_delimiter = ',')]
    etas: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct SweepSnrArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// SNR values in dB, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snrs: Option<Vec<f64>>,
    /// Schemes to compare, comma separated.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
}

#[derive(Args, Debug)]
struct MakeFixturesArgs {
    /// Directory to write synthetic.yuv and synthetic_roi.csv into.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 30)]
    frames: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 176)]
    width: usize,
    #[arg(long, default_value_t = 144)]
    height: usize,
    /// Pixels the moving object advances per frame.
    #[arg(long, default_value_t = 4)]
    speed: usize,
}

/// Fully resolved settings: defaults, then config file, then flags.
#[derive(Debug, Clone)]
struct Settings {
    video: Option<PathBuf>,
    roi_csv: Option<PathBuf>,
    width: usize,
    height: usize,
    format: PixelFormat,
    reference: usize,
    frames: Vec<usize>,
    etas: Vec<f64>,
    snrs: Vec<f64>,
    schemes: Vec<Scheme>,
    out: Option<PathBuf>,
    params: harness::PipelineParams,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            video: None,
            roi_csv: None,
            width: 176,
            height: 144,
            format: PixelFormat::Luma,
            reference: 0,
            frames: vec![2],
            etas: (1..=10).map(|i| i as f64 / 10.0).collect(),
            snrs: vec![-5.0, 0.0, 5.0, 10.0],
            schemes: vec![Scheme::Softcast, Scheme::Kmvcast, Scheme::Roiccast],
            out: None,
            params: harness::PipelineParams::default(),
        }
    }
}

fn usage(message: impl Into<String>) -> Error {
    Error::Validation(message.into())
}

fn parse_format(text: &str) -> Result<PixelFormat> {
    match text {
        "yuv420" => Ok(PixelFormat::Yuv420),
        "luma" => Ok(PixelFormat::Luma),
        other => Err(usage(format!("unknown format `{other}` (yuv420 | luma)"))),
    }
}

fn parse_channel(text: &str) -> Result<ChannelKind> {
    match text {
        "awgn" => Ok(ChannelKind::Awgn),
        "rayleigh" => Ok(ChannelKind::Rayleigh),
        other => Err(usage(format!(
            "unknown channel `{other}` (awgn | rayleigh)"
        ))),
    }
}

fn parse_decoder(text: &str) -> Result<DecoderKind> {
    match text {
        "zf" => Ok(DecoderKind::Zf),
        "llse" => Ok(DecoderKind::Llse),
        other => Err(usage(format!("unknown decoder `{other}` (zf | llse)"))),
    }
}

fn parse_bool(text: &str) -> Result<bool> {
    match text {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        other => Err(usage(format!("expected a boolean, got `{other}`"))),
    }
}

fn parse_num<T: std::str::FromStr>(text: &str, key: &str) -> Result<T> {
    text.parse()
        .map_err(|_| usage(format!("cannot parse `{text}` for {key}")))
}

fn parse_list<T: std::str::FromStr>(text: &str, key: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(s, key))
        .collect()
}

impl Settings {
    fn apply_config_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        for (line_no, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no + 1,
                msg: "expected `key = value`".into(),
            })?;
            self.apply_kv(key.trim(), value.trim())?;
        }
        Ok(())
    }

    fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "video" => self.video = Some(PathBuf::from(value)),
            "roi_csv" => self.roi_csv = Some(PathBuf::from(value)),
            "width" => self.width = parse_num(value, key)?,
            "height" => self.height = parse_num(value, key)?,
            "format" => self.format = parse_format(value)?,
            "reference" => self.reference = parse_num(value, key)?,
            "frames" => self.frames = parse_list(value, key)?,
            "scheme" => self.params.scheme = Scheme::parse(value)?,
            "eta" => self.params.eta = parse_num(value, key)?,
            "p_t" => self.params.p_t = Some(parse_num(value, key)?),
            "sigma0_sq" => self.params.sigma0_sq = parse_num(value, key)?,
            "snr_db" => self.params.channel_snr_db = parse_num(value, key)?,
            "channel" => self.params.channel = parse_channel(value)?,
            "seed" => self.params.seed = parse_num(value, key)?,
            "packet_len" => self.params.packet_len = parse_num(value, key)?,
            "whitening" => self.params.whitening = parse_bool(value)?,
            "ofdm" => self.params.ofdm = parse_bool(value)?,
            "symbol_budget" => self.params.symbol_budget = Some(parse_num(value, key)?),
            "decoder" => self.params.decoder = parse_decoder(value)?,
            "match_radius" => self.params.match_radius = parse_num(value, key)?,
            "analytic" => self.params.analytic = parse_bool(value)?,
            "mcs_table" => self.params.mcs = load_mcs_table(Path::new(value))?,
            "etas" => self.etas = parse_list(value, key)?,
            "snrs" => self.snrs = parse_list(value, key)?,
            "schemes" => {
                self.schemes = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(Scheme::parse)
                    .collect::<Result<_>>()?;
            }
            "out" => self.out = Some(PathBuf::from(value)),
            other => return Err(usage(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    fn apply_common(&mut self, args: &CommonArgs) -> Result<()> {
        if let Some(path) = &args.config {
            self.apply_config_file(path)?;
        }
        if let Some(v) = &args.video {
            self.video = Some(v.clone());
        }
        if let Some(v) = &args.roi_csv {
            self.roi_csv = Some(v.clone());
        }
        if let Some(v) = args.width {
            self.width = v;
        }
        if let Some(v) = args.height {
            self.height = v;
        }
        if let Some(v) = &args.format {
            self.format = parse_format(v)?;
        }
        if let Some(v) = args.reference {
            self.reference = v;
        }
        if let Some(v) = &args.frames {
            self.frames = v.clone();
        }
        if let Some(v) = &args.scheme {
            self.params.scheme = Scheme::parse(v)?;
        }
        if let Some(v) = args.eta {
            self.params.eta = v;
        }
        if let Some(v) = args.p_t {
            self.params.p_t = Some(v);
        }
        if let Some(v) = args.sigma0_sq {
            self.params.sigma0_sq = v;
        }
        if let Some(v) = args.snr_db {
            self.params.channel_snr_db = v;
        }
        if let Some(v) = &args.channel {
            self.params.channel = parse_channel(v)?;
        }
        if let Some(v) = args.seed {
            self.params.seed = v;
        }
        if let Some(v) = args.packet_len {
            self.params.packet_len = v;
        }
        if let Some(v) = args.whitening {
            self.params.whitening = v;
        }
        if let Some(v) = args.ofdm {
            self.params.ofdm = v;
        }
        if let Some(v) = args.symbol_budget {
            self.params.symbol_budget = Some(v);
        }
        if let Some(v) = &args.decoder {
            self.params.decoder = parse_decoder(v)?;
        }
        if let Some(v) = args.match_radius {
            self.params.match_radius = v;
        }
        if let Some(v) = args.analytic {
            self.params.analytic = v;
        }
        if let Some(path) = &args.mcs_table {
            self.params.mcs = load_mcs_table(path)?;
        }
        if let Some(v) = &args.out {
            self.out = Some(v.clone());
        }
        Ok(())
    }

    fn experiment_config(&self) -> Result<ExperimentConfig> {
        let video = self
            .video
            .clone()
            .ok_or_else(|| usage("--video (or `video =` in the config) is required"))?;
        if self.frames.is_empty() {
            return Err(usage("at least one frame must be requested"));
        }
        Ok(ExperimentConfig {
            video,
            roi_csv: self.roi_csv.clone(),
            width: self.width,
            height: self.height,
            format: self.format,
            reference_index: self.reference,
            frames: self.frames.clone(),
            params: self.params.clone(),
        })
    }
}

fn load_mcs_table(path: &Path) -> Result<McsTable> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    McsTable::from_csv(&text)
}

fn emit(out: &Option<PathBuf>, file_name: &str, contents: &str) -> Result<()> {
    match out {
        None => {
            print!("{contents}");
            Ok(())
        }
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|source| Error::Io {
                path: dir.clone(),
                source,
            })?;
            let path = dir.join(file_name);
            fs::write(&path, contents).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn cmd_run(args: &RunArgs, fading_trace: bool) -> Result<()> {
    let mut settings = Settings::default();
    if fading_trace {
        settings.params.channel = ChannelKind::Rayleigh;
    }
    settings.apply_common(&args.common)?;
    let config = settings.experiment_config()?;
    let inputs = harness::load_inputs(&config)?;

    if fading_trace {
        let trace = harness::run_fading_trace(&inputs, &config.params, &config.frames)?;
        let (frames_csv, packets_csv) = harness::render_fade_csvs(&config, &trace);
        emit(&settings.out, "fade_frames.csv", &frames_csv)?;
        emit(&settings.out, "fade_trace.csv", &packets_csv)?;
        return Ok(());
    }

    let results = harness::run_frames(&inputs, &config.params, &config.frames)?;
    emit(
        &settings.out,
        "run.csv",
        &harness::render_run_csv(&config, &results),
    )?;
    if let Some(dir) = &settings.out {
        for result in &results {
            if let Some(frame) = &result.reconstructed {
                let name = format!("recon_f{}_{}.pgm", result.frame_number, result.scheme);
                media_io::write_frame_pgm(frame, &dir.join(name))?;
            }
        }
    }
    Ok(())
}

fn cmd_sweep_eta(args: &SweepEtaArgs) -> Result<()> {
    let mut settings = Settings::default();
    settings.apply_common(&args.common)?;
    if let Some(etas) = &args.etas {
        settings.etas = etas.clone();
    }
    let config = settings.experiment_config()?;
    let inputs = harness::load_inputs(&config)?;
    let rows = harness::run_eta_sweep(&inputs, &config.params, config.frames[0], &settings.etas)?;
    emit(
        &settings.out,
        "sweep_eta.csv",
        &harness::render_eta_csv(&config, &rows),
    )
}

fn cmd_sweep_snr(args: &SweepSnrArgs) -> Result<()> {
    let mut settings = Settings::default();
    settings.apply_common(&args.common)?;
    if let Some(snrs) = &args.snrs {
        settings.snrs = snrs.clone();
    }
    if let Some(schemes) = &args.schemes {
        settings.schemes = schemes
            .iter()
            .map(|s| Scheme::parse(s))
            .collect::<Result<_>>()?;
    }
    let config = settings.experiment_config()?;
    let inputs = harness::load_inputs(&config)?;
    let rows = harness::run_snr_sweep(
        &inputs,
        &config.params,
        config.frames[0],
        &settings.snrs,
        &settings.schemes,
    )?;
    emit(
        &settings.out,
        "sweep_snr.csv",
        &harness::render_snr_csv(&config, &rows),
    )
}

fn cmd_make_fixtures(args: &MakeFixturesArgs) -> Result<()> {
    fs::create_dir_all(&args.out).map_err(|source| Error::Io {
        path: args.out.clone(),
        source,
    })?;
    let config = SynthConfig {
        width: args.width,
        height: args.height,
        frames: args.frames,
        seed: args.seed,
        speed: args.speed,
    };
    let (video, csv) = roicast::synth::write_fixtures(&args.out, &config)?;
    eprintln!("wrote {}", video.display());
    eprintln!("wrote {}", csv.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Run(args) => cmd_run(args, false),
        Command::FadeTrace(args) => cmd_run(args, true),
        Command::SweepEta(args) => cmd_sweep_eta(args),
        Command::SweepSnr(args) => cmd_sweep_snr(args),
        Command::MakeFixtures(args) => cmd_make_fixtures(args),
    }
}

fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::Infeasible(_) | Error::Capacity(_) => 2,
        Error::Anomaly(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) =>
        {
            print!("{err}");
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            eprintln!("{err}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(exit_code_for(&error))
        }
    }
}
