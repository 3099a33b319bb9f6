//! Pipeline driver behind the `micromotion` binary.
//!
//! Every stage reads `crystal.snap` from the output directory when it matches
//! the config hash and truncation, and otherwise computes and writes it.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use micromotion::artifact::ArtifactHeader;
use micromotion::equilibrium::{solve_equilibrium, EquilibriumTrajectory, IterationSettings};
use micromotion::gate::{
    design_robust, detuning_sensitivity, optimize_pulse, scan_detuning, scan_t0, write_pulse_csv,
    write_report, write_scan_csv, write_t0_csv, GateContext, GateReport, PulseSequence, RobustSettings,
};
use micromotion::md::{verify_mode, write_trace_csv, ExcitationSpec, IntegratorSettings};
use micromotion::modes::{solve_modes, ModeSet, ModeSettings};
use micromotion::snapshot::CrystalSnapshot;
use micromotion::{Config, Error, ErrorClass, Result, TruncationSettings};

pub const SNAPSHOT_FILE: &str = "crystal.snap";

#[derive(Debug, Parser)]
#[command(name = "micromotion", version, about = "Ion-crystal equilibrium, Floquet modes and gate design")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args, Clone)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Seed of the damped equilibrium search.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, global = true)]
    pub precision: Option<f64>,
    #[arg(long = "fourier-order", global = true)]
    pub fourier_order: Option<usize>,
    #[arg(long = "phase-order", global = true)]
    pub phase_order: Option<usize>,
    #[arg(long, global = true)]
    pub ncut: Option<usize>,
    /// `MIN:MAX:STEP`; Hz for `scan`, s for `t0-scan`.
    #[arg(long, global = true)]
    pub grid: Option<String>,
}

#[derive(Debug, Subcommand, Clone)]
pub enum Command {
    /// Solve the periodic crystal and write the snapshot.
    Equilibrium,
    /// Append the Floquet mode set to the snapshot.
    Modes,
    /// Compare molecular dynamics with one excited mode.
    VerifyMd(VerifyArgs),
    /// Optimize a pulse at the configured detuning.
    Design,
    /// Optimize over a detuning grid.
    Scan,
    /// Robust design and detuning-sensitivity table.
    Robust(RobustArgs),
    /// Evaluate the designed pulse over a grid of start offsets.
    T0Scan,
}

#[derive(Debug, Args, Clone)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub mode: usize,
    #[arg(long, default_value_t = 0.01)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 1000)]
    pub periods: usize,
    #[arg(long = "steps-per-period", default_value_t = 1000)]
    pub steps_per_period: usize,
    /// Flat coordinate index `3 ion + axis` written to the trace.
    #[arg(long, default_value_t = 0)]
    pub probe: usize,
    #[arg(long = "record-every", default_value_t = 10)]
    pub record_every: usize,
}

#[derive(Debug, Args, Clone)]
pub struct RobustArgs {
    #[arg(long, default_value_t = 16)]
    pub starts: usize,
    #[arg(long = "residual-weight", default_value_t = 1.0)]
    pub residual_weight: f64,
    /// Detuning drift in Hz for the sensitivity table.
    #[arg(long, default_value_t = 1e3)]
    pub drift: f64,
    #[arg(long, default_value_t = false)]
    pub asymmetric: bool,
}

/// Everything one invocation needs.
#[derive(Debug, Clone)]
pub struct JobSpec {
    pub command: Command,
    pub config: Config,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: usize,
    pub grid: Option<Grid>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Grid {
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("grid `{text}` is not MIN:MAX:STEP")));
        }
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| Error::Config(format!("grid entry `{p}` is not a number"))))
            .collect::<Result<_>>()?;
        let g = Self { min: v[0], max: v[1], step: v[2] };
        if !(g.min < g.max) || !(g.step > 0.0) || !g.max.is_finite() {
            return Err(Error::Config(format!("grid `{text}` needs MIN < MAX and STEP > 0")));
        }
        Ok(g)
    }

    /// `min + k step` up to `max`, inclusive within rounding.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step * (1.0 + 1e-12)).floor() as usize;
        (0..=n).map(|k| self.min + k as f64 * self.step).collect()
    }
}

impl JobSpec {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let c = cli.common;
        let path = c.config.ok_or_else(|| Error::Config("--config is required".into()))?;
        let mut config = Config::from_path(&path)?;
        let t = &mut config.truncation;
        if let Some(p) = c.precision {
            t.precision = p;
        }
        if let Some(m) = c.fourier_order {
            t.fourier_order = m;
        }
        if let Some(l) = c.phase_order {
            t.phase_order = l;
        }
        if let Some(n) = c.ncut {
            t.ncut = n;
        }
        t.validate().map_err(|e| Error::Config(e.to_string()))?;
        let grid = c.grid.as_deref().map(Grid::parse).transpose()?;
        Ok(Self { command: cli.command, config, out: c.out, seed: c.seed, threads: c.threads, grid })
    }
}

/// Process exit code for an error class.
pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Instability => 3,
        ErrorClass::NonConvergence => 4,
        ErrorClass::Other => 1,
    }
}

/// Tracks files written by this run; a failure removes the ones it created.
struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
    created: Vec<PathBuf>,
}

impl Outputs {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<PathBuf> {
        let path = self.path(name);
        if !path.exists() {
            self.created.push(path.clone());
        }
        if !self.written.contains(&path) {
            self.written.push(path.clone());
        }
        let mut w = BufWriter::new(File::create(&path)?);
        body(&mut w)?;
        w.flush()?;
        Ok(path)
    }

    fn discard(&self) {
        for p in &self.created {
            let _ = std::fs::remove_file(p);
        }
    }
}

fn check_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let probe = dir.join(".micromotion-write-test");
    File::create(&probe).map_err(|e| Error::Config(format!("output directory {} is not writable: {e}", dir.display())))?;
    std::fs::remove_file(&probe)?;
    Ok(())
}

fn mode_settings(t: &TruncationSettings) -> ModeSettings {
    ModeSettings { n_cut: t.ncut, m_trunc: t.fourier_order, ..ModeSettings::default() }
}

/// Runs one job; returns the files written.
pub fn run(job: &JobSpec) -> Result<Vec<PathBuf>> {
    check_dir(&job.out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(job.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut out = Outputs { dir: job.out.clone(), written: Vec::new(), created: Vec::new() };
    match pool.install(|| Pipeline { job, out: &mut out }.run()) {
        Ok(()) => Ok(out.written),
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}

struct Pipeline<'a> {
    job: &'a JobSpec,
    out: &'a mut Outputs,
}

impl Pipeline<'_> {
    fn config(&self) -> &Config {
        &self.job.config
    }

    fn header(&self, kind: &str) -> ArtifactHeader {
        ArtifactHeader::new(kind, self.config().hash.clone(), self.config().truncation)
    }

    /// A stored snapshot is reused when it came from the same config, order and seed.
    fn stored(&self) -> Option<CrystalSnapshot> {
        let path = self.out.path(SNAPSHOT_FILE);
        if !path.exists() {
            return None;
        }
        let snap = CrystalSnapshot::read_path(&path).ok()?;
        let c = self.config();
        let same = snap.config_hash == c.hash
            && snap.truncation.fourier_order == c.truncation.fourier_order
            && snap.trajectory.seed == self.job.seed
            && snap.trajectory.n_ions == c.ion_count;
        same.then_some(snap)
    }

    fn save(&mut self, snap: &CrystalSnapshot) -> Result<()> {
        let text = snap.to_text();
        self.out.write(SNAPSHOT_FILE, |w| Ok(w.write_all(text.as_bytes())?))?;
        Ok(())
    }

    fn crystal(&mut self, force: bool) -> Result<CrystalSnapshot> {
        if !force {
            if let Some(s) = self.stored() {
                info!("reusing {}", SNAPSHOT_FILE);
                return Ok(s);
            }
        }
        let c = self.config();
        info!("solving equilibrium for {} ions at order {}", c.ion_count, c.truncation.fourier_order);
        let traj = solve_equilibrium(
            &c.drive,
            c.ion_count,
            c.truncation.fourier_order,
            &IterationSettings::default(),
            self.job.seed,
        )?;
        if !traj.converged {
            return Err(Error::NonConvergence(format!("equilibrium residual {:.3e}", traj.residual)));
        }
        let snap = CrystalSnapshot::new(c, traj);
        self.save(&snap)?;
        Ok(snap)
    }

    fn with_modes(&mut self, force: bool) -> Result<(EquilibriumTrajectory, ModeSet)> {
        let snap = self.crystal(false)?;
        let ncut = self.config().truncation.ncut;
        let reusable = |m: &ModeSet| !force && m.snapshot_hash == snap.hash() && m.modes.first().is_some_and(|x| x.n_cut() == ncut);
        if let Some(m) = snap.modes.as_ref().filter(|m| reusable(m)) {
            return Ok((snap.trajectory.clone(), m.clone()));
        }
        info!("solving Floquet modes");
        let modes = solve_modes(&snap.trajectory, &snap.drive, &mode_settings(&self.config().truncation))?;
        let snap = snap.with_modes(modes);
        self.save(&snap)?;
        let modes = snap.modes.clone().expect("modes attached");
        Ok((snap.trajectory, modes))
    }

    fn context(&mut self) -> Result<GateContext> {
        let (traj, modes) = self.with_modes(false)?;
        GateContext::from_config(&traj, &modes, self.config())
    }

    fn grid(&self, what: &str) -> Result<Vec<f64>> {
        self.job.grid.map(|g| g.points()).ok_or_else(|| Error::Config(format!("{what} needs --grid MIN:MAX:STEP")))
    }

    fn write_design(&mut self, prefix: &str, ctx: &GateContext, pulse: &PulseSequence, report: &GateReport) -> Result<()> {
        let h = self.header("pulse");
        self.out.write(&format!("{prefix}pulse.csv"), |w| write_pulse_csv(w, &h, pulse))?;
        let h = self.header("report");
        self.out.write(&format!("{prefix}report.txt"), |w| write_report(w, &h, ctx, report))?;
        Ok(())
    }

    fn run(mut self) -> Result<()> {
        match &self.job.command {
            Command::Equilibrium => {
                self.crystal(true)?;
            }
            Command::Modes => {
                self.with_modes(true)?;
            }
            Command::VerifyMd(a) => {
                let (traj, modes) = self.with_modes(false)?;
                let settings = IntegratorSettings {
                    steps_per_period: a.steps_per_period,
                    periods: a.periods,
                    record_every: a.record_every,
                };
                settings.validate()?;
                let exc = ExcitationSpec { mode: a.mode, amplitude: a.amplitude };
                let report = verify_mode(&traj, &self.config().drive, &modes, &exc, &settings, a.probe)?;
                info!("max deviation {:.3e} (all coordinates {:.3e})", report.max_deviation, report.max_deviation_all);
                let h = self.header("md-trace");
                self.out.write("md_trace.csv", |w| {
                    h.write_comments(w)?;
                    writeln!(w, "# max_deviation = {:.17e}", report.max_deviation)?;
                    let mut buf = Vec::new();
                    write_trace_csv(&mut buf, &report.trace)?;
                    Ok(w.write_all(&buf)?)
                })?;
            }
            Command::Design => {
                let ctx = self.context()?;
                let (pulse, report, _) = optimize_pulse(&ctx)?;
                info!("delta_F = {:.6e}", report.delta_f);
                self.write_design("", &ctx, &pulse, &report)?;
            }
            Command::Scan => {
                let grid: Vec<f64> = self.grid("scan")?.iter().map(|f| 2.0 * std::f64::consts::PI * f).collect();
                let ctx = self.context()?;
                let rows = scan_detuning(&ctx, &grid);
                let h = self.header("scan");
                self.out.write("scan.csv", |w| write_scan_csv(w, &h, &rows))?;
            }
            Command::Robust(a) => {
                let ctx = self.context()?;
                let (pulse, report, _) = optimize_pulse(&ctx)?;
                let settings = RobustSettings {
                    starts: a.starts,
                    residual_weight: a.residual_weight,
                    symmetric: !a.asymmetric,
                    seed: self.job.seed,
                    ..RobustSettings::default()
                };
                let design = design_robust(&ctx, &settings)?;
                self.write_design("robust_", &ctx, &design.pulse, &design.report)?;
                let step = 2.0 * std::f64::consts::PI * a.drift;
                let rows = [
                    ("standard", detuning_sensitivity(&ctx, &pulse, step)?, report.delta_f),
                    ("robust", detuning_sensitivity(&ctx, &design.pulse, step)?, design.report.delta_f),
                ];
                let h = self.header("sensitivity");
                self.out.write("sensitivity.csv", |w| {
                    h.write_comments(w)?;
                    writeln!(w, "design,step_rad_s,delta_F,delta_F_plus,delta_F_minus,slope_per_rad_s")?;
                    for (name, s, _) in &rows {
                        writeln!(
                            w,
                            "{name},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                            s.step,
                            s.delta_f,
                            s.delta_f_plus,
                            s.delta_f_minus,
                            s.slope()
                        )?;
                    }
                    Ok(())
                })?;
            }
            Command::T0Scan => {
                let grid = self.grid("t0-scan")?;
                let ctx = self.context()?;
                let (pulse, _, _) = optimize_pulse(&ctx)?;
                let rows = scan_t0(&ctx, &pulse, &grid);
                let h = self.header("t0-scan");
                self.out.write("t0_scan.csv", |w| write_t0_csv(w, &h, &rows))?;
            }
        }
        Ok(())
    }
}
