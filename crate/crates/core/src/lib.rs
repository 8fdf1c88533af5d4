//! Fixed-size and sequential detection of a weak variance change in
//! Gaussian noise, applied to the OSCAR single-spin MRFM measurement chain.
//!
//! The crate is organised bottom-up:
//!
//! * [`distributions`]: scaled χ² and Fisher-F laws, fixed sample sizes.
//! * [`signal_chain`]: synthetic OSCAR observations (FM carrier, telegraph
//!   spin relaxation, square-wave correlation, low-pass and subsampling).
//! * [`detectors`]: energy and Fisher-ratio statistics and their LLRs.
//! * [`sequential`]: Wald's SPRT, operating characteristic and ASN.
//! * [`brownian`]: Brownian-motion approximation of the χ² LLR, truncated
//!   SPRT and stopping-time prediction.
//! * [`fisher_asn`]: low-snr series for the expected Fisher-F LLR.
//! * [`montecarlo`]: seeded experiment harness.
//! * [`cli`]: configuration files, CSV output, subcommand dispatch.

pub mod brownian;
pub mod cli;
pub mod detectors;
pub mod distributions;
pub mod error;
pub mod fisher_asn;
pub mod montecarlo;
pub mod sequential;
pub mod signal_chain;

pub use error::{Error, Result};

/// Which hypothesis generated (or is assumed to have generated) the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    /// Noise only.
    H0,
    /// Spin signal present.
    H1,
}

impl Hypothesis {
    pub fn label(self) -> &'static str {
        match self {
            Hypothesis::H0 => "H0",
            Hypothesis::H1 => "H1",
        }
    }
}

impl std::str::FromStr for Hypothesis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "H0" => Ok(Hypothesis::H0),
            "H1" => Ok(Hypothesis::H1),
            other => Err(Error::InvalidArgument(format!(
                "unknown hypothesis '{other}'"
            ))),
        }
    }
}
