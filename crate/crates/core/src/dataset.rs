//! Labelled source-localization samples: noisy snapshots of hypergraph
//! diffusions started from one of several source hyperedges.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{diffuse, DEFAULT_STEPS, DEFAULT_STEP_SIZE};
use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;

const FORMAT_TAG: &str = "# henn-dataset v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub sources: usize,
    pub t_max: usize,
    pub step_size: f64,
    /// Standard deviation of the per-node noise added to the initial signal.
    pub noise_sd: f64,
    /// Standard deviation of the noise added to each sampled snapshot.
    pub measurement_sd: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            sources: 10,
            t_max: DEFAULT_STEPS,
            step_size: DEFAULT_STEP_SIZE,
            noise_sd: 0.1,
            measurement_sd: 0.1,
            n_train: 500,
            n_test: 300,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Index into the source list, in `0..sources`.
    pub label: usize,
    pub time: usize,
    pub signal: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub n: usize,
    pub m: usize,
    /// Hyperedge index of each class.
    pub sources: Vec<usize>,
    pub samples: Vec<Sample>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub config: DatasetConfig,
}

impl LabeledDataset {
    pub fn train_samples(&self) -> impl Iterator<Item = &Sample> {
        self.train.iter().map(|&i| &self.samples[i])
    }

    pub fn test_samples(&self) -> impl Iterator<Item = &Sample> {
        self.test.iter().map(|&i| &self.samples[i])
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = BufWriter::new(std::fs::File::create(path)?);
        let c = &self.config;
        writeln!(f, "{FORMAT_TAG}")?;
        writeln!(f, "n={}", self.n)?;
        writeln!(f, "m={}", self.m)?;
        writeln!(f, "n_train={}", self.train.len())?;
        writeln!(f, "n_test={}", self.test.len())?;
        writeln!(f, "seed={}", c.seed)?;
        writeln!(f, "t_max={}", c.t_max)?;
        writeln!(f, "step_size={:?}", c.step_size)?;
        writeln!(f, "noise_sd={:?}", c.noise_sd)?;
        writeln!(f, "measurement_sd={:?}", c.measurement_sd)?;
        let src: Vec<String> = self.sources.iter().map(usize::to_string).collect();
        writeln!(f, "sources={}", src.join(" "))?;
        writeln!(f, "---")?;
        for s in &self.samples {
            write!(f, "{},{}", s.label, s.time)?;
            for v in &s.signal {
                write!(f, ",{v:.16e}")?;
            }
            writeln!(f)?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let reader = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines().enumerate();
        let mut header = std::collections::BTreeMap::new();
        let mut seen_tag = false;
        for (k, line) in lines.by_ref() {
            let line = line?;
            if line == FORMAT_TAG {
                seen_tag = true;
                continue;
            }
            if line == "---" {
                break;
            }
            let (key, value) = line.split_once('=').ok_or(Error::Parse {
                line: k + 1,
                message: format!("expected key=value, found `{line}`"),
            })?;
            header.insert(key.to_string(), (k + 1, value.to_string()));
        }
        if !seen_tag {
            return Err(Error::Parse {
                line: 1,
                message: "not a dataset file".into(),
            });
        }
        fn get<T: std::str::FromStr>(
            h: &std::collections::BTreeMap<String, (usize, String)>,
            key: &str,
        ) -> Result<T> {
            let (line, v) = h.get(key).ok_or(Error::Parse {
                line: 0,
                message: format!("missing header key `{key}`"),
            })?;
            v.parse().map_err(|_| Error::Parse {
                line: *line,
                message: format!("bad value for `{key}`"),
            })
        }
        let n: usize = get(&header, "n")?;
        let m: usize = get(&header, "m")?;
        let n_train: usize = get(&header, "n_train")?;
        let n_test: usize = get(&header, "n_test")?;
        let sources_text: String = get(&header, "sources")?;
        let sources = sources_text
            .split_whitespace()
            .map(|t| {
                t.parse().map_err(|_| Error::Parse {
                    line: 0,
                    message: format!("bad source `{t}`"),
                })
            })
            .collect::<Result<Vec<usize>>>()?;
        let config = DatasetConfig {
            sources: sources.len(),
            t_max: get(&header, "t_max")?,
            step_size: get(&header, "step_size")?,
            noise_sd: get(&header, "noise_sd")?,
            measurement_sd: get(&header, "measurement_sd")?,
            n_train,
            n_test,
            seed: get(&header, "seed")?,
        };
        let mut samples = Vec::with_capacity(n_train + n_test);
        for (k, line) in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse {
                line: k + 1,
                message,
            };
            let mut it = line.split(',');
            let label = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad("bad label".into()))?;
            let time = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad("bad time".into()))?;
            let signal = it
                .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad value `{t}`"))))
                .collect::<Result<Vec<_>>>()?;
            if signal.len() != n {
                return Err(bad(format!("expected {n} values, found {}", signal.len())));
            }
            samples.push(Sample {
                label,
                time,
                signal,
            });
        }
        if samples.len() != n_train + n_test {
            return Err(Error::Parse {
                line: 0,
                message: format!(
                    "expected {} samples, found {}",
                    n_train + n_test,
                    samples.len()
                ),
            });
        }
        Ok(Self {
            n,
            m,
            sources,
            samples,
            train: (0..n_train).collect(),
            test: (n_train..n_train + n_test).collect(),
            config,
        })
    }
}

/// Draws the sources, runs one diffusion per source and samples noisy
/// snapshots. The first `n_train` samples form the training split.
pub fn generate_dataset(h: &Hypergraph, config: &DatasetConfig) -> Result<LabeledDataset> {
    if config.sources == 0 || h.m() < config.sources {
        return Err(Error::TooFewHyperedges {
            found: h.m(),
            needed: config.sources.max(1),
        });
    }
    let input_noise = normal(config.noise_sd)?;
    let meas_noise = normal(config.measurement_sd)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sources = sample_indices(&mut rng, h.m(), config.sources).into_vec();
    let starts: Vec<DVector<f64>> = sources
        .iter()
        .map(|&s| {
            let mut x = DVector::from_fn(h.n(), |_, _| input_noise.sample(&mut rng));
            for &i in &h.edges()[s] {
                x[i] += 1.0;
            }
            x
        })
        .collect();
    let trajectories = starts
        .par_iter()
        .map(|x0| diffuse(h, x0, config.t_max, config.step_size))
        .collect::<Result<Vec<_>>>()?;
    let total = config.n_train + config.n_test;
    let samples = (0..total)
        .map(|_| {
            let label = rng.random_range(0..config.sources);
            let time = rng.random_range(0..=config.t_max);
            let signal = trajectories[label][time]
                .iter()
                .map(|v| v + meas_noise.sample(&mut rng))
                .collect();
            Sample {
                label,
                time,
                signal,
            }
        })
        .collect();
    Ok(LabeledDataset {
        n: h.n(),
        m: h.m(),
        sources,
        samples,
        train: (0..config.n_train).collect(),
        test: (config.n_train..total).collect(),
        config: config.clone(),
    })
}

fn normal(sd: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sd).map_err(|e| Error::InvalidArgument(format!("noise sd {sd}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring() -> Hypergraph {
        let edges = (0..12).map(|i| vec![i, (i + 1) % 12, (i + 2) % 12]).collect();
        Hypergraph::unweighted(12, edges).unwrap()
    }

    #[test]
    fn sizes_and_labels() {
        let d = generate_dataset(&ring(), &DatasetConfig::default()).unwrap();
        assert_eq!(d.train.len(), 500);
        assert_eq!(d.test.len(), 300);
        assert_eq!(d.sources.len(), 10);
        assert!(d.samples.iter().all(|s| s.label < 10 && s.time <= 30));
        assert!(d.samples.iter().all(|s| s.signal.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn noiseless_initial_sample_is_indicator() {
        let cfg = DatasetConfig {
            noise_sd: 0.0,
            measurement_sd: 0.0,
            n_train: 200,
            n_test: 0,
            ..Default::default()
        };
        let h = ring();
        let d = generate_dataset(&h, &cfg).unwrap();
        let s = d.samples.iter().find(|s| s.time == 0).expect("some t=0 sample");
        let e = &h.edges()[d.sources[s.label]];
        for (i, &v) in s.signal.iter().enumerate() {
            assert_eq!(v, e.contains(&i) as u8 as f64);
        }
    }

    #[test]
    fn too_few_hyperedges() {
        let h = Hypergraph::unweighted(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        assert!(matches!(
            generate_dataset(&h, &DatasetConfig::default()),
            Err(Error::TooFewHyperedges { found: 2, needed: 10 })
        ));
    }

    #[test]
    fn file_round_trip_is_exact() {
        let cfg = DatasetConfig {
            n_train: 20,
            n_test: 7,
            seed: 9,
            ..Default::default()
        };
        let d = generate_dataset(&ring(), &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.txt");
        d.write(&p).unwrap();
        assert_eq!(LabeledDataset::read(&p).unwrap(), d);
    }

    #[test]
    fn deterministic() {
        let cfg = DatasetConfig {
            n_train: 30,
            n_test: 10,
            seed: 4,
            ..Default::default()
        };
        assert_eq!(
            generate_dataset(&ring(), &cfg).unwrap(),
            generate_dataset(&ring(), &cfg).unwrap()
        );
    }
}
