//! Detuning and start-offset scans plus the text outputs of gate design.

use std::io::Write;

use rayon::prelude::*;

use super::optimize::{evaluate_sequence, optimize_pulse, GateReport, PulseSequence};
use super::GateContext;
use crate::artifact::ArtifactHeader;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    /// Detuning in rad/s.
    pub mu: f64,
    pub delta_f: f64,
    pub theta: f64,
    pub max_alpha: f64,
    /// `ok` or the failure message.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct T0Row {
    /// Start offset in s.
    pub t0: f64,
    pub delta_f: f64,
    pub theta: f64,
    pub status: String,
}

fn status_of(e: &crate::error::Error) -> String {
    e.to_string().replace([',', '\n'], ";")
}

/// Optimizes at every detuning (rad/s); failures are recorded per row.
pub fn scan_detuning(ctx: &GateContext, grid: &[f64]) -> Vec<ScanRow> {
    grid.par_iter()
        .map(|&mu| match optimize_pulse(&ctx.with_detuning(mu)) {
            Ok((_, r, _)) => ScanRow { mu, delta_f: r.delta_f, theta: r.theta, max_alpha: r.max_alpha(), status: "ok".into() },
            Err(e) => ScanRow { mu, delta_f: f64::NAN, theta: f64::NAN, max_alpha: f64::NAN, status: status_of(&e) },
        })
        .collect()
}

/// Evaluates a fixed pulse at every start offset (s).
pub fn scan_t0(ctx: &GateContext, pulse: &PulseSequence, grid: &[f64]) -> Vec<T0Row> {
    grid.par_iter()
        .map(|&t0| match evaluate_sequence(ctx, pulse, t0) {
            Ok(r) => T0Row { t0, delta_f: r.delta_f, theta: r.theta, status: "ok".into() },
            Err(e) => T0Row { t0, delta_f: f64::NAN, theta: f64::NAN, status: status_of(&e) },
        })
        .collect()
}

pub fn write_scan_csv(w: &mut dyn Write, header: &ArtifactHeader, rows: &[ScanRow]) -> Result<()> {
    header.write_comments(w)?;
    writeln!(w, "mu_rad_s,delta_F,Theta_rad,max_alpha_abs,status")?;
    for r in rows {
        writeln!(w, "{:.17e},{:.17e},{:.17e},{:.17e},{}", r.mu, r.delta_f, r.theta, r.max_alpha, r.status)?;
    }
    Ok(())
}

pub fn write_t0_csv(w: &mut dyn Write, header: &ArtifactHeader, rows: &[T0Row]) -> Result<()> {
    header.write_comments(w)?;
    writeln!(w, "t0_s,delta_F,Theta_rad,status")?;
    for r in rows {
        writeln!(w, "{:.17e},{:.17e},{:.17e},{}", r.t0, r.delta_f, r.theta, r.status)?;
    }
    Ok(())
}

/// Segments are numbered from 1; times are relative to the gate start.
pub fn write_pulse_csv(w: &mut dyn Write, header: &ArtifactHeader, pulse: &PulseSequence) -> Result<()> {
    header.write_comments(w)?;
    writeln!(w, "segment_index,t_start_s,t_end_s,Omega_rad_s")?;
    for (p, om) in pulse.omega_rad_s().iter().enumerate() {
        let (a, b) = pulse.segment_times(p);
        writeln!(w, "{},{:.17e},{:.17e},{:.17e}", p + 1, a, b, om)?;
    }
    Ok(())
}

pub fn write_report(w: &mut dyn Write, header: &ArtifactHeader, ctx: &GateContext, report: &GateReport) -> Result<()> {
    header.write_comments(w)?;
    writeln!(w, "[gate]")?;
    writeln!(w, "ions = {} {}", ctx.ions.0, ctx.ions.1)?;
    writeln!(w, "segments = {}", ctx.segments)?;
    writeln!(w, "gate_time_s = {:.17e}", ctx.tau * ctx.units.time)?;
    writeln!(w, "detuning_rad_s = {:.17e}", ctx.detuning())?;
    writeln!(w, "t0_s = {:.17e}", report.t0)?;
    writeln!(w, "Theta_rad = {:.17e}", report.theta)?;
    writeln!(w, "target_rad = {:.17e}", report.target)?;
    writeln!(w, "delta_F = {:.17e}", report.delta_f)?;
    writeln!(w, "phase_term = {:.17e}", report.phase_term)?;
    match report.lambda {
        Some(l) => writeln!(w, "lambda = {l:.17e}")?,
        None => writeln!(w, "lambda = none")?,
    }
    writeln!(w, "max_rabi_rad_s = {:.17e}", report.max_rabi)?;
    writeln!(w, "bound_exceeded = {}", report.bound_exceeded)?;
    writeln!(w, "[alpha]")?;
    writeln!(w, "mode,ion,re,im")?;
    for (k, a) in report.alpha.iter().enumerate() {
        for (s, z) in a.iter().enumerate() {
            let ion = if s == 0 { ctx.ions.0 } else { ctx.ions.1 };
            writeln!(w, "{k},{ion},{:.17e},{:.17e}", z.re, z.im)?;
        }
    }
    writeln!(w, "[modes]")?;
    writeln!(w, "mode,beta,eta,nbar,delta_F")?;
    for (k, (m, c)) in ctx.modes.iter().zip(&report.mode_contributions).enumerate() {
        writeln!(w, "{k},{:.17e},{:.17e},{:.17e},{:.17e}", m.beta, m.eta, m.nbar, c)?;
    }
    Ok(())
}
