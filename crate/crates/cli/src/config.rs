use serde::{Deserialize, Serialize};

use blockpr::{build_deterministic_masks, build_random_masks, derive_seed, MaskEnsemble, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Robustness,
    Runtime,
    Condno,
    Flatness,
    Sparse,
    Verify,
    Recover,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Robustness => "robustness",
            Experiment::Runtime => "runtime",
            Experiment::Condno => "condno",
            Experiment::Flatness => "flatness",
            Experiment::Sparse => "sparse",
            Experiment::Verify => "verify",
            Experiment::Recover => "recover",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MaskChoice {
    /// Damped Fourier masks, `2 delta - 1` of them.
    Det,
    /// Oversampled complex Gaussian masks.
    Rand,
}

/// SNR values in JSON: finite values as numbers, noiseless as `"inf"`.
pub mod snr_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Finite(f64),
        Named(String),
    }

    fn to_repr(v: f64) -> Repr {
        if v == f64::INFINITY {
            Repr::Named("inf".into())
        } else {
            Repr::Finite(v)
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Finite(v) => Ok(v),
            Repr::Named(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Named(s) => Err(E::custom(format!("invalid SNR {s:?}"))),
        }
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&x| to_repr(x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Repr>::deserialize(d)?.into_iter().map(from_repr).collect()
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            v.map(to_repr).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Option::<Repr>::deserialize(d)?.map(from_repr).transpose()
        }
    }
}

/// Random streams derived from the master seed. Streams are keyed by trial
/// index only, so every grid point sees the same signals and noise shapes.
pub mod stream {
    pub const SIGNAL: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const FLATTEN: u64 = 3;
    pub const MASKS: u64 = 4;
    pub const SKETCH: u64 = 5;
}

/// Complete description of a seeded experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub d: Vec<usize>,
    pub delta: Vec<usize>,
    pub masks: MaskChoice,
    /// Damping of the deterministic masks (default per `delta`).
    pub a: Option<f64>,
    /// Oversampling factor of random masks.
    pub gamma: f64,
    /// SNR grid in dB; `inf` means noiseless.
    #[serde(with = "snr_serde")]
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Measure `W x` and undo `W` after recovery.
    pub flatten: bool,
    /// Draw `m`-flat test signals instead of plain Gaussian ones.
    pub flat_m: Option<usize>,
    /// Flatness block size or sketch rows, depending on the experiment.
    pub m: Option<usize>,
    /// Sparsity of sparse-pipeline test signals.
    pub s: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            d: vec![64],
            delta: vec![8],
            masks: MaskChoice::Det,
            a: None,
            gamma: 1.0,
            snr_db: vec![f64::INFINITY],
            trials: 10,
            seed: 0,
            flatten: false,
            flat_m: None,
            m: None,
            s: None,
        }
    }

    pub fn trial_seed(&self, stream: u64, trial: usize) -> u64 {
        derive_seed(self.seed, stream, trial as u64)
    }

    pub fn ensemble(&self, d: usize, delta: usize, trial: usize) -> Result<MaskEnsemble> {
        match self.masks {
            MaskChoice::Det => build_deterministic_masks(d, delta, self.a),
            MaskChoice::Rand => build_random_masks(d, delta, self.gamma, self.trial_seed(stream::MASKS, trial)),
        }
    }
}
