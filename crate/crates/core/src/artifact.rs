//! Provenance header shared by every output file.

use std::io::Write;

use crate::config::TruncationSettings;
use crate::error::Result;

/// Version tag written into snapshots, CSV files and reports.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactHeader {
    pub kind: String,
    pub config_hash: String,
    pub truncation: TruncationSettings,
}

impl ArtifactHeader {
    pub fn new(kind: impl Into<String>, config_hash: impl Into<String>, truncation: TruncationSettings) -> Self {
        Self { kind: kind.into(), config_hash: config_hash.into(), truncation }
    }

    /// Writes `# key = value` comment lines.
    pub fn write_comments(&self, w: &mut dyn Write) -> Result<()> {
        let t = &self.truncation;
        writeln!(w, "# micromotion {} format {}", self.kind, FORMAT_VERSION)?;
        writeln!(w, "# config_hash = {}", self.config_hash)?;
        writeln!(
            w,
            "# truncation = fourier_order {} phase_order {} ncut {} precision {:e} bessel_cutoff {}",
            t.fourier_order, t.phase_order, t.ncut, t.precision, t.bessel_cutoff
        )?;
        Ok(())
    }
}
