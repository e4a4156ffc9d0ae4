//! Detection of the onset of careless responding in long rating-scale surveys.
//!
//! The detector builds a short multivariate series per respondent, one entry
//! per item, from two complementary signals:
//!
//! * reconstruction errors of an autoencoder trained on the full sample,
//!   which react to inconsistent responding, and
//! * longest-string-pattern values, which react to invariable responding
//!   (straightlining and repeating patterns).
//!
//! A self-normalized changepoint test is then applied to each respondent's
//! series. Respondents whose test statistic exceeds the critical value are
//! flagged and the maximizing item is reported as the estimated onset of
//! careless responding.
//!
//! The companion modules provide classical screeners for comparison, a
//! survey simulator with a controllable careless-responding mix, and a
//! study driver that aggregates error rates over replicates.

pub mod autoencoder;
pub mod changepoint;
pub mod data;
mod error;
pub mod lsp;
pub mod pipeline;
pub mod screeners;
pub mod seed;
pub mod simulate;

pub use error::{Error, Result};
