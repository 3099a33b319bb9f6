//! Versioned text snapshot of a crystal and, optionally, its mode set.
//!
//! Layout: comment header, `[crystal]` key/value block, `[B]` rows
//! `n ion x y z` (n ascending, ion ascending), then an optional `[modes]`
//! block with one `mode` line per mode followed by its `C_{2n}` rows.
//! Floats are written with 18 significant digits and read back exactly.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DVector, Matrix3, Vector3};
use sha2::{Digest, Sha256};

use crate::artifact::{ArtifactHeader, FORMAT_VERSION};
use crate::config::{Config, TruncationSettings};
use crate::equilibrium::EquilibriumTrajectory;
use crate::error::{Error, Result};
use crate::modes::{ModeSet, NormalMode};
use crate::units::{build_units, IonSpecies, TrapDrive, UnitSystem};

#[derive(Debug, Clone, PartialEq)]
pub struct CrystalSnapshot {
    pub config_hash: String,
    pub truncation: TruncationSettings,
    pub species: IonSpecies,
    pub drive: TrapDrive,
    pub units: UnitSystem,
    pub trajectory: EquilibriumTrajectory,
    pub modes: Option<ModeSet>,
}

fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

fn fmt_matrix(m: &Matrix3<f64>) -> String {
    (0..3).flat_map(|i| (0..3).map(move |j| fmt(m[(i, j)]))).collect::<Vec<_>>().join(" ")
}

impl CrystalSnapshot {
    pub fn new(config: &Config, trajectory: EquilibriumTrajectory) -> Self {
        Self {
            config_hash: config.hash.clone(),
            truncation: config.truncation,
            species: config.species.clone(),
            drive: config.drive.clone(),
            units: build_units(&config.species, &config.drive),
            trajectory,
            modes: None,
        }
    }

    /// Attaches a mode set, stamping it with this crystal's hash.
    pub fn with_modes(mut self, mut modes: ModeSet) -> Self {
        modes.snapshot_hash = self.hash();
        self.modes = Some(modes);
        self
    }

    fn crystal_text(&self) -> String {
        let t = &self.trajectory;
        let u = &self.units;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("format", FORMAT_VERSION.to_string());
        kv("ions", t.n_ions.to_string());
        kv("order", t.order().to_string());
        kv("species", self.species.label.clone());
        kv("mass_kg", fmt(self.species.mass));
        kv("charge", self.species.charge.to_string());
        kv("rf_frequency_rad_s", fmt(self.drive.rf_frequency));
        kv("A", fmt_matrix(&self.drive.a));
        kv("Q", fmt_matrix(&self.drive.q));
        kv("length_unit_m", fmt(u.length));
        kv("time_unit_s", fmt(u.time));
        kv("frequency_unit_rad_s", fmt(u.frequency));
        kv("energy_unit_J", fmt(u.energy));
        kv("residual", fmt(t.residual));
        kv("converged", t.converged.to_string());
        kv("iterations", t.iterations.to_string());
        kv("seed", t.seed.to_string());
        s.push_str("[B]\n");
        for (n, row) in t.b.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                s.push_str(&format!("{n} {i} {} {} {}\n", fmt(v.x), fmt(v.y), fmt(v.z)));
            }
        }
        s
    }

    /// Hex SHA-256 prefix of the crystal block.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.crystal_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn write(&self, w: &mut dyn Write) -> Result<()> {
        ArtifactHeader::new("crystal", self.config_hash.clone(), self.truncation).write_comments(w)?;
        writeln!(w, "[crystal]")?;
        w.write_all(self.crystal_text().as_bytes())?;
        if let Some(set) = &self.modes {
            let n_cut = set.modes.first().map_or(0, |m| m.n_cut());
            writeln!(w, "[modes]")?;
            writeln!(w, "count = {}", set.len())?;
            writeln!(w, "n_cut = {n_cut}")?;
            writeln!(w, "unstable = {}", set.unstable)?;
            writeln!(w, "snapshot_hash = {}", set.snapshot_hash)?;
            let n_ions = self.trajectory.n_ions;
            for (k, m) in set.modes.iter().enumerate() {
                writeln!(
                    w,
                    "mode {k} {} {} {} {}",
                    fmt(m.beta),
                    fmt(m.residual),
                    m.normalized,
                    m.imaginary
                )?;
                for (b, c) in m.c.iter().enumerate() {
                    let n = b as i64 - m.n_cut() as i64;
                    for i in 0..n_ions {
                        writeln!(w, "{n} {i} {} {} {}", fmt(c[3 * i]), fmt(c[3 * i + 1]), fmt(c[3 * i + 2]))?;
                    }
                }
            }
        }
        writeln!(w, "[end]")?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("snapshot text is ASCII")
    }

    pub fn write_path(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Format(format!("reading {}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Parser::new(text).snapshot()
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim().parse().map_err(|_| bad(format!("cannot parse {what} from `{s}`")))
}

struct Parser<'a> {
    lines: std::iter::Peekable<std::vec::IntoIter<&'a str>>,
    comments: Vec<&'a str>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let (comments, body): (Vec<&str>, Vec<&str>) =
            text.lines().filter(|l| !l.trim().is_empty()).partition(|l| l.starts_with('#'));
        Self { lines: body.into_iter().peekable(), comments }
    }

    fn expect(&mut self, line: &str) -> Result<()> {
        match self.lines.next() {
            Some(l) if l.trim() == line => Ok(()),
            other => Err(bad(format!("expected `{line}`, found `{}`", other.unwrap_or("end of file")))),
        }
    }

    /// Reads `key = value` lines up to the next section marker.
    fn block(&mut self) -> Result<HashMap<&'a str, &'a str>> {
        let mut map = HashMap::new();
        while let Some(l) = self.lines.peek() {
            if l.starts_with('[') {
                break;
            }
            let l = self.lines.next().unwrap();
            let (k, v) = l.split_once(" = ").ok_or_else(|| bad(format!("malformed line `{l}`")))?;
            map.insert(k.trim(), v.trim());
        }
        Ok(map)
    }

    fn row(&mut self, n: i64, i: usize) -> Result<Vector3<f64>> {
        let l = self.lines.next().ok_or_else(|| bad("truncated coefficient table"))?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 5 || num::<i64>(f[0], "index")? != n || num::<usize>(f[1], "ion")? != i {
            return Err(bad(format!("expected row ({n}, {i}), found `{l}`")));
        }
        Ok(Vector3::new(num(f[2], "x")?, num(f[3], "y")?, num(f[4], "z")?))
    }

    fn truncation(&self) -> Result<TruncationSettings> {
        let line = self
            .comments
            .iter()
            .find_map(|l| l.strip_prefix("# truncation = "))
            .ok_or_else(|| bad("missing truncation header"))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        let get = |key: &str| -> Result<&str> {
            f.iter()
                .position(|k| *k == key)
                .and_then(|p| f.get(p + 1))
                .copied()
                .ok_or_else(|| bad(format!("truncation header lacks {key}")))
        };
        Ok(TruncationSettings {
            fourier_order: num(get("fourier_order")?, "fourier_order")?,
            phase_order: num(get("phase_order")?, "phase_order")?,
            ncut: num(get("ncut")?, "ncut")?,
            precision: num(get("precision")?, "precision")?,
            bessel_cutoff: num(get("bessel_cutoff")?, "bessel_cutoff")?,
        })
    }

    fn snapshot(mut self) -> Result<CrystalSnapshot> {
        let version = format!("format {FORMAT_VERSION}");
        match self.comments.first() {
            Some(l) if l.starts_with("# micromotion crystal ") => {
                if !l.ends_with(&version) {
                    return Err(bad(format!("unsupported version in `{l}`")));
                }
            }
            _ => return Err(bad("not a crystal snapshot")),
        }
        let config_hash = self
            .comments
            .iter()
            .find_map(|l| l.strip_prefix("# config_hash = "))
            .ok_or_else(|| bad("missing config hash"))?
            .to_string();
        let truncation = self.truncation()?;

        self.expect("[crystal]")?;
        let kv = self.block()?;
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| bad(format!("missing key `{k}`")));
        let matrix = |k: &str| -> Result<Matrix3<f64>> {
            let v: Vec<f64> = get(k)?.split_whitespace().map(|s| num(s, k)).collect::<Result<_>>()?;
            if v.len() != 9 {
                return Err(bad(format!("{k} needs 9 entries")));
            }
            Ok(Matrix3::from_row_slice(&v))
        };
        let n_ions: usize = num(get("ions")?, "ions")?;
        let order: usize = num(get("order")?, "order")?;
        let species = IonSpecies::new(get("species")?, num(get("mass_kg")?, "mass")?, num(get("charge")?, "charge")?)?;
        let drive = TrapDrive::new(num(get("rf_frequency_rad_s")?, "rf frequency")?, matrix("A")?, matrix("Q")?)?;
        let units = UnitSystem {
            length: num(get("length_unit_m")?, "length unit")?,
            time: num(get("time_unit_s")?, "time unit")?,
            frequency: num(get("frequency_unit_rad_s")?, "frequency unit")?,
            energy: num(get("energy_unit_J")?, "energy unit")?,
            mass: species.mass,
        };
        let residual = num(get("residual")?, "residual")?;
        let converged = num(get("converged")?, "converged")?;
        let iterations = num(get("iterations")?, "iterations")?;
        let seed = num(get("seed")?, "seed")?;

        self.expect("[B]")?;
        let mut b = Vec::with_capacity(order + 1);
        for n in 0..=order {
            b.push((0..n_ions).map(|i| self.row(n as i64, i)).collect::<Result<Vec<_>>>()?);
        }
        let trajectory = EquilibriumTrajectory { n_ions, b, residual, converged, iterations, seed };

        let modes = if self.lines.peek().map(|l| l.trim()) == Some("[modes]") {
            self.lines.next();
            Some(self.modes(n_ions)?)
        } else {
            None
        };
        self.expect("[end]")?;
        Ok(CrystalSnapshot { config_hash, truncation, species, drive, units, trajectory, modes })
    }

    fn modes(&mut self, n_ions: usize) -> Result<ModeSet> {
        let mut kv = HashMap::new();
        while let Some(l) = self.lines.peek() {
            if l.starts_with("mode ") || l.starts_with('[') {
                break;
            }
            let l = self.lines.next().unwrap();
            let (k, v) = l.split_once(" = ").ok_or_else(|| bad(format!("malformed line `{l}`")))?;
            kv.insert(k.trim(), v.trim());
        }
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| bad(format!("missing key `{k}`")));
        let count: usize = num(get("count")?, "count")?;
        let n_cut: usize = num(get("n_cut")?, "n_cut")?;
        let unstable = num(get("unstable")?, "unstable")?;
        let snapshot_hash = get("snapshot_hash").unwrap_or("").to_string();
        let mut modes = Vec::with_capacity(count);
        for k in 0..count {
            let l = self.lines.next().ok_or_else(|| bad("truncated mode list"))?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 6 || f[0] != "mode" || num::<usize>(f[1], "mode index")? != k {
                return Err(bad(format!("expected mode {k}, found `{l}`")));
            }
            let mut c = Vec::with_capacity(2 * n_cut + 1);
            for n in -(n_cut as i64)..=n_cut as i64 {
                let mut v = DVector::zeros(3 * n_ions);
                for i in 0..n_ions {
                    let r = self.row(n, i)?;
                    v.fixed_rows_mut::<3>(3 * i).copy_from(&r);
                }
                c.push(v);
            }
            modes.push(NormalMode {
                beta: num(f[2], "beta")?,
                c,
                residual: num(f[3], "mode residual")?,
                normalized: num(f[4], "normalized")?,
                imaginary: num(f[5], "imaginary")?,
            });
        }
        Ok(ModeSet { modes, unstable, snapshot_hash })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{refine_fourier, IterationSettings};
    use crate::modes::{solve_modes, ModeSettings};

    const CONFIG: &str = r#"
[ion]
mass = "171 amu"
count = 2
[trap]
rf_frequency = "50 MHz"
a = [-0.015, -0.015, 0.03]
q = [0.3, -0.3, 0.0]
[laser]
wavelength = "355 nm"
direction = [1.0, 0.0, 0.0]
detuning = "3.1 MHz"
gate_time = "40 us"
segments = 4
ions = [0, 1]
[thermal]
temperature = "0.5 mK"
"#;

    fn crystal() -> CrystalSnapshot {
        let config = Config::parse(CONFIG).unwrap();
        let d = (8.0f64 / 0.03).cbrt();
        let seed = EquilibriumTrajectory::from_static(
            vec![Vector3::new(0.0, 0.0, -d / 2.0), Vector3::new(0.0, 0.0, d / 2.0)],
            4,
        );
        let traj = refine_fourier(&seed, &config.drive, &IterationSettings::default()).unwrap();
        CrystalSnapshot::new(&config, traj)
    }

    #[test]
    fn crystal_round_trips_exactly() {
        let snap = crystal();
        let text = snap.to_text();
        let back = CrystalSnapshot::parse(&text).unwrap();
        assert_eq!(back.trajectory, snap.trajectory);
        assert_eq!(back.drive, snap.drive);
        assert_eq!(back.units, snap.units);
        assert_eq!(back.to_text(), text);
        assert_eq!(back.hash(), snap.hash());
    }

    #[test]
    fn modes_round_trip_and_carry_hash() {
        let snap = crystal();
        let modes = solve_modes(&snap.trajectory, &snap.drive, &ModeSettings::default()).unwrap();
        let snap = snap.clone().with_modes(modes);
        let text = snap.to_text();
        let back = CrystalSnapshot::parse(&text).unwrap();
        // NaN residuals of imaginary modes defeat PartialEq, so compare text and betas
        assert_eq!(back.to_text(), text);
        let (a, b) = (back.modes.unwrap(), snap.modes.clone().unwrap());
        assert_eq!(a.betas(), b.betas());
        assert_eq!(a.modes[3].c, b.modes[3].c);
        assert_eq!(a.snapshot_hash, snap.hash());
    }

    #[test]
    fn rejects_other_versions_and_damage() {
        let text = crystal().to_text();
        assert!(CrystalSnapshot::parse(&text.replace("format 1", "format 9")).is_err());
        let cut: String = text.lines().take(25).map(|l| format!("{l}\n")).collect();
        assert!(matches!(CrystalSnapshot::parse(&cut), Err(Error::Format(_))));
    }
}
