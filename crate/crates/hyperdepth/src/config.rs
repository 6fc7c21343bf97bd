//! Run configuration shared by the scoring and evaluation commands.
//! Flags only — no config files; the `HYPERDEPTH_*` environment variables
//! may stand in for the path flags.

use std::path::PathBuf;

use crate::depth::TopologyKind;
use crate::eval::TieMode;
use crate::headings::SimMethod;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub topology: TopologyKind,
    /// Retrieval depth per word.
    pub k: usize,
    pub sim: SimMethod,
    pub embeddings: Option<PathBuf>,
    pub max_disambig_hops: u32,
    pub use_stoplist: bool,
    pub tie: TieMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            topology: TopologyKind::Star,
            k: 1000,
            sim: SimMethod::Jaccard,
            embeddings: None,
            max_disambig_hops: 2,
            use_stoplist: true,
            tie: TieMode::Stable,
        }
    }
}

impl RunConfig {
    /// Usage-level validation; failures should exit with code 2.
    pub fn validate(&self) -> Result<(), String> {
        if self.k == 0 {
            return Err("k must be at least 1".into());
        }
        if self.sim == SimMethod::EmbeddingCosine && self.embeddings.is_none() {
            return Err("--sim cosine requires --embeddings".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_documented_ones() {
        let c = RunConfig::default();
        assert_eq!(c.topology, TopologyKind::Star);
        assert_eq!(c.k, 1000);
        assert_eq!(c.sim, SimMethod::Jaccard);
        assert_eq!(c.max_disambig_hops, 2);
        assert!(c.use_stoplist);
        assert_eq!(c.tie, TieMode::Stable);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn cosine_without_embeddings_is_a_usage_error() {
        let c = RunConfig {
            sim: SimMethod::EmbeddingCosine,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_k_is_a_usage_error() {
        let c = RunConfig { k: 0, ..RunConfig::default() };
        assert!(c.validate().is_err());
    }
}
