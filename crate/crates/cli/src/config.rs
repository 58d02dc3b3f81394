//! Run configuration: a flat TOML file whose every key can also be given on
//! the command line. Command-line values win over the file, and the master
//! seed may also come from the `DQKD_SEED` environment variable.
//!
//! ```toml
//! protocol = "duplex"          # duplex | bb84
//! variant = "flip_triples"     # flip_triples | search_pairs
//! n_timeslots = 1000
//! loss = 0.0
//! flip = 0.01
//! eve = "intercept_resend"     # absent | intercept_resend
//! intercept_fraction = 0.5
//! eve_basis = "uniform_random" # uniform_random | always_x | always_y
//! sample_fraction = 0.25       # bb84 only
//! error_threshold = 0.0        # bb84 only
//! failure_policy = "abort_on_any"   # abort_on_any | threshold
//! failure_threshold = 0.05     # used by the threshold policy
//! search_key = "keep"          # keep | discard (search_pairs only)
//! pairs = 10                   # optional cap on checked pairs
//! sessions = 100
//! seed = 1
//! ```

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use duplex_qkd::adversary::{BasisPolicy, EveStrategy};
use duplex_qkd::bb84::Bb84Config;
use duplex_qkd::duplex::{DuplexConfig, FailurePolicy, PairingVariant, SearchKeyPolicy};
use duplex_qkd::stats::{Protocol, SweepGrid};
use duplex_qkd::ChannelModel;

pub const SEED_ENV: &str = "DQKD_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ProtocolArg {
    Duplex,
    Bb84,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Duplex => Protocol::Duplex,
            ProtocolArg::Bb84 => Protocol::Bb84,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum VariantArg {
    FlipTriples,
    SearchPairs,
}

impl From<VariantArg> for PairingVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::FlipTriples => PairingVariant::FlipTriples,
            VariantArg::SearchPairs => PairingVariant::SearchPairs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum EveArg {
    Absent,
    InterceptResend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum EveBasisArg {
    UniformRandom,
    AlwaysX,
    AlwaysY,
}

impl From<EveBasisArg> for BasisPolicy {
    fn from(b: EveBasisArg) -> Self {
        match b {
            EveBasisArg::UniformRandom => BasisPolicy::UniformRandom,
            EveBasisArg::AlwaysX => BasisPolicy::AlwaysX,
            EveBasisArg::AlwaysY => BasisPolicy::AlwaysY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum FailurePolicyArg {
    AbortOnAny,
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SearchKeyArg {
    Keep,
    Discard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    Tsv,
}

impl OutputFormat {
    pub fn delimiter(self) -> Option<u8> {
        match self {
            OutputFormat::Json => None,
            OutputFormat::Csv => Some(b','),
            OutputFormat::Tsv => Some(b'\t'),
        }
    }
}

/// Fully resolved configuration of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub protocol: ProtocolArg,
    pub variant: VariantArg,
    pub n_timeslots: usize,
    pub loss: f64,
    pub flip: f64,
    pub eve: EveArg,
    pub intercept_fraction: f64,
    pub eve_basis: EveBasisArg,
    pub sample_fraction: f64,
    pub error_threshold: f64,
    pub failure_policy: FailurePolicyArg,
    pub failure_threshold: f64,
    pub search_key: SearchKeyArg,
    pub pairs: Option<usize>,
    pub sessions: u32,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            protocol: ProtocolArg::Duplex,
            variant: VariantArg::FlipTriples,
            n_timeslots: 1000,
            loss: 0.0,
            flip: 0.0,
            eve: EveArg::Absent,
            intercept_fraction: 1.0,
            eve_basis: EveBasisArg::UniformRandom,
            sample_fraction: 0.25,
            error_threshold: 0.0,
            failure_policy: FailurePolicyArg::AbortOnAny,
            failure_threshold: 0.0,
            search_key: SearchKeyArg::Keep,
            pairs: None,
            sessions: 1,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn channel(&self) -> Result<ChannelModel> {
        Ok(ChannelModel::new(self.loss, self.flip)?)
    }

    pub fn eve_strategy(&self) -> Result<EveStrategy> {
        Ok(match self.eve {
            EveArg::Absent => EveStrategy::absent(),
            EveArg::InterceptResend => {
                EveStrategy::intercept_resend(self.intercept_fraction, self.eve_basis.into())?
            }
        })
    }

    pub fn failure(&self) -> FailurePolicy {
        match self.failure_policy {
            FailurePolicyArg::AbortOnAny => FailurePolicy::AbortOnAny,
            FailurePolicyArg::Threshold => FailurePolicy::Threshold(self.failure_threshold),
        }
    }

    pub fn duplex_config(&self) -> Result<DuplexConfig> {
        let cfg = DuplexConfig {
            n_timeslots: self.n_timeslots,
            channel: self.channel()?,
            eve: self.eve_strategy()?,
            variant: self.variant.into(),
            failure_policy: self.failure(),
            search_key_policy: match self.search_key {
                SearchKeyArg::Keep => SearchKeyPolicy::Keep,
                SearchKeyArg::Discard => SearchKeyPolicy::Discard,
            },
            pair_limit: self.pairs,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn bb84_config(&self) -> Result<Bb84Config> {
        let cfg = Bb84Config {
            n_timeslots: self.n_timeslots,
            channel: self.channel()?,
            eve: self.eve_strategy()?,
            sample_fraction: self.sample_fraction,
            seed: self.seed,
            error_threshold: self.error_threshold,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every field, whichever protocol is selected.
    pub fn validate(&self) -> Result<()> {
        if self.sessions == 0 {
            bail!("sessions must be at least 1");
        }
        self.channel()?;
        self.eve_strategy()?;
        match self.protocol {
            ProtocolArg::Duplex => {
                self.duplex_config()?;
            }
            ProtocolArg::Bb84 => {
                self.bb84_config()?;
            }
        }
        Ok(())
    }
}

/// Command-line overrides for every [`RunConfig`] field.
#[derive(Debug, Clone, Default, Args)]
pub struct RunOverrides {
    /// TOML file with run settings; flags override its values.
    #[arg(long, short = 'c')]
    pub config: Option<std::path::PathBuf>,
    #[arg(long, value_enum)]
    pub protocol: Option<ProtocolArg>,
    /// Duplex pairing variant.
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long = "timeslots", short = 'n')]
    pub n_timeslots: Option<usize>,
    /// Photon loss probability.
    #[arg(long)]
    pub loss: Option<f64>,
    /// Within-basis bit-flip probability of the channel.
    #[arg(long)]
    pub flip: Option<f64>,
    #[arg(long, value_enum)]
    pub eve: Option<EveArg>,
    /// Fraction of slots Eve intercepts (implies --eve intercept_resend).
    #[arg(long)]
    pub intercept: Option<f64>,
    #[arg(long, value_enum)]
    pub eve_basis: Option<EveBasisArg>,
    /// BB84 fraction of sifted bits compared publicly.
    #[arg(long)]
    pub sample_fraction: Option<f64>,
    /// BB84 sampled error rate above which a session is flagged.
    #[arg(long)]
    pub error_threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub failure_policy: Option<FailurePolicyArg>,
    /// Pair failure rate tolerated by the threshold policy.
    #[arg(long)]
    pub failure_threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub search_key: Option<SearchKeyArg>,
    /// Check at most this many pairs per duplex session.
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long)]
    pub sessions: Option<u32>,
    /// Master seed.
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
}

impl RunOverrides {
    /// Loads the config file (if any) and applies the flags on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        self.apply(cfg)
    }

    /// Applies the flags on top of `cfg` and validates the result.
    pub fn apply(&self, mut cfg: RunConfig) -> Result<RunConfig> {
        macro_rules! set {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = self.$field { cfg.$target = v; })*
            };
        }
        set!(
            protocol => protocol,
            variant => variant,
            n_timeslots => n_timeslots,
            loss => loss,
            flip => flip,
            eve => eve,
            intercept => intercept_fraction,
            eve_basis => eve_basis,
            sample_fraction => sample_fraction,
            error_threshold => error_threshold,
            failure_policy => failure_policy,
            failure_threshold => failure_threshold,
            search_key => search_key,
            sessions => sessions,
            seed => seed,
        );
        if self.intercept.is_some() && self.eve.is_none() {
            cfg.eve = EveArg::InterceptResend;
        }
        if self.pairs.is_some() {
            cfg.pairs = self.pairs;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Sweep settings: a base run plus parameter lists.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(flatten)]
    pub base: RunConfig,
    #[serde(default)]
    pub grid: SweepGrid,
}

impl SweepConfig {
    /// Empty grid axes collapse to the single value of the base run.
    pub fn fill_empty_axes(&mut self) {
        let base = &self.base;
        let grid = &mut self.grid;
        if grid.intercept_fractions.is_empty() {
            grid.intercept_fractions.push(match base.eve {
                EveArg::Absent => 0.0,
                EveArg::InterceptResend => base.intercept_fraction,
            });
        }
        if grid.flip_probabilities.is_empty() {
            grid.flip_probabilities.push(base.flip);
        }
        if grid.loss_probabilities.is_empty() {
            grid.loss_probabilities.push(base.loss);
        }
        if grid.n_timeslots.is_empty() {
            grid.n_timeslots.push(base.n_timeslots);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let points = self.grid.points()?;
        for p in points {
            let mut cfg = self.base.clone();
            cfg.intercept_fraction = p.intercept_fraction;
            cfg.eve = EveArg::InterceptResend;
            cfg.flip = p.flip_probability;
            cfg.loss = p.loss_probability;
            cfg.n_timeslots = p.n_timeslots;
            cfg.validate()?;
        }
        Ok(())
    }
}
