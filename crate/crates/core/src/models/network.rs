use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ArchitectureConfig, ArchitectureKind};
use crate::dataset::WeatherVariable;
use crate::error::{Error, Result};
use crate::nn::{init, Graph, Mode, NodeId, ParamId, ParamStore, Tensor};
use crate::preprocess::{FeatureManifest, FeatureMatrix};

const PREDICT_CHUNK: usize = 256;

/// Where each model input lives in a feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputLayout {
    pub others: Vec<usize>,
    pub weather_starts: [usize; WeatherVariable::COUNT],
    pub periods: usize,
}

impl InputLayout {
    pub fn from_manifest(manifest: &FeatureManifest) -> Result<Self> {
        manifest.check_partition()?;
        let mut weather_starts = [0; WeatherVariable::COUNT];
        for var in WeatherVariable::ALL {
            let g = manifest
                .weather_group(var)
                .ok_or_else(|| Error::ManifestMismatch(format!("no weather group for {}", var.name())))?;
            if g.len != manifest.periods {
                return Err(Error::ManifestMismatch(format!(
                    "weather group {} has {} columns, expected {}",
                    var.name(),
                    g.len,
                    manifest.periods
                )));
            }
            weather_starts[var.index()] = g.start;
        }
        let others = manifest.categorical_columns();
        if others.is_empty() {
            return Err(Error::ManifestMismatch("no categorical columns".into()));
        }
        Ok(Self {
            others,
            weather_starts,
            periods: manifest.periods,
        })
    }

    /// `others [B, n_cat]` and one `[B, 1, periods]` tensor per weather variable.
    pub fn batch(&self, values: ArrayView2<f64>, rows: &[usize]) -> (Tensor, Vec<Tensor>) {
        let b = rows.len();
        let mut others = Vec::with_capacity(b * self.others.len());
        for &r in rows {
            let row = values.row(r);
            others.extend(self.others.iter().map(|&c| row[c]));
        }
        let weather = self
            .weather_starts
            .iter()
            .map(|&start| {
                let mut data = Vec::with_capacity(b * self.periods);
                for &r in rows {
                    let row = values.row(r);
                    data.extend((start..start + self.periods).map(|c| row[c]));
                }
                Tensor::new(vec![b, 1, self.periods], data).expect("layout shape")
            })
            .collect();
        (
            Tensor::new(vec![b, self.others.len()], others).expect("layout shape"),
            weather,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct DenseIds {
    w: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
struct LstmIds {
    w_ih: ParamId,
    w_hh: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
struct ParamIds {
    /// `[variable][layer]`
    conv: Vec<Vec<DenseIds>>,
    post_cnn: Option<DenseIds>,
    lstm: Option<LstmIds>,
    others: DenseIds,
    head: [DenseIds; 3],
    out: DenseIds,
}

/// A CNN-DNN or CNN-LSTM-DNN bound to one feature manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: ArchitectureConfig,
    manifest: FeatureManifest,
    layout: InputLayout,
    params: ParamStore,
    ids: ParamIds,
}

impl Network {
    /// Builds and seeds a network for `manifest`.
    pub fn build(config: ArchitectureConfig, manifest: &FeatureManifest) -> Result<Self> {
        let layout = InputLayout::from_manifest(manifest)?;
        config.validate(layout.periods)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamStore::new();
        let conv_len = config.conv_output_len(layout.periods)?;
        let last_filters = config.conv.last().expect("validated").filters;

        let dense =
            |params: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng| DenseIds {
                w: params.add(format!("{name}.w"), init::he_uniform(&[fan_in, fan_out], fan_in, rng)),
                b: params.add(format!("{name}.b"), Tensor::zeros(&[fan_out])),
            };

        let mut conv = Vec::with_capacity(WeatherVariable::COUNT);
        for var in WeatherVariable::ALL {
            let mut c_in = 1;
            let mut layers = Vec::with_capacity(config.conv.len());
            for (l, spec) in config.conv.iter().enumerate() {
                let fan_in = c_in * spec.kernel;
                let name = format!("conv.{}.{l}", var.name());
                layers.push(DenseIds {
                    w: params.add(
                        format!("{name}.w"),
                        init::he_uniform(&[spec.filters, c_in, spec.kernel], fan_in, &mut rng),
                    ),
                    b: params.add(format!("{name}.b"), Tensor::zeros(&[spec.filters])),
                });
                c_in = spec.filters;
            }
            conv.push(layers);
        }

        let stream_width = WeatherVariable::COUNT * last_filters;
        let (post_cnn, lstm, cnn_width) = match config.kind {
            ArchitectureKind::CnnDnn => {
                let ids = dense(
                    &mut params,
                    "post_cnn",
                    stream_width * conv_len,
                    config.post_cnn_units,
                    &mut rng,
                );
                (Some(ids), None, config.post_cnn_units)
            }
            ArchitectureKind::CnnLstmDnn => {
                let h = config.lstm_units.expect("validated");
                let ids = LstmIds {
                    w_ih: params.add("lstm.w_ih", init::lstm_uniform(&[stream_width, 4 * h], h, &mut rng)),
                    w_hh: params.add("lstm.w_hh", init::lstm_uniform(&[h, 4 * h], h, &mut rng)),
                    b: params.add("lstm.b", init::lstm_bias(h)),
                };
                (None, Some(ids), h)
            }
        };
        let others = dense(
            &mut params,
            "others",
            layout.others.len(),
            config.others_units,
            &mut rng,
        );
        let [h0, h1, h2] = config.head_units;
        let head = [
            dense(&mut params, "head.0", cnn_width + config.others_units, h0, &mut rng),
            dense(&mut params, "head.1", h0, h1, &mut rng),
            dense(&mut params, "head.2", h1, h2, &mut rng),
        ];
        let out = dense(&mut params, "out", h2, 1, &mut rng);

        Ok(Self {
            config,
            manifest: manifest.clone(),
            layout,
            params,
            ids: ParamIds {
                conv,
                post_cnn,
                lstm,
                others,
                head,
                out,
            },
        })
    }

    /// Rebinds checkpointed parameters, checking names and shapes.
    pub fn from_parts(config: ArchitectureConfig, manifest: &FeatureManifest, params: ParamStore) -> Result<Self> {
        let mut net = Self::build(config, manifest)?;
        if params.len() != net.params.len() {
            return Err(Error::ManifestMismatch(format!(
                "checkpoint has {} parameters, architecture needs {}",
                params.len(),
                net.params.len()
            )));
        }
        for ((a, ta), (b, tb)) in net.params.iter().zip(params.iter()) {
            if a != b || ta.shape() != tb.shape() {
                return Err(Error::shape(format!("parameter {a}"), ta.shape(), (b, tb.shape())));
            }
        }
        net.params = params;
        Ok(net)
    }

    pub fn config(&self) -> &ArchitectureConfig {
        &self.config
    }

    pub fn kind(&self) -> ArchitectureKind {
        self.config.kind
    }

    pub fn manifest(&self) -> &FeatureManifest {
        &self.manifest
    }

    pub fn layout(&self) -> &InputLayout {
        &self.layout
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub(crate) fn output_bias(&self) -> ParamId {
        self.ids.out.b
    }

    /// Records the forward pass on `g` and returns the `[B, 1]` output node.
    pub fn forward(&self, g: &mut Graph<'_>, others: Tensor, weather: Vec<Tensor>) -> Result<NodeId> {
        if weather.len() != WeatherVariable::COUNT {
            return Err(Error::shape("model input", WeatherVariable::COUNT, weather.len()));
        }
        let batch = others.shape()[0];
        let dense = |g: &mut Graph<'_>, x: NodeId, ids: DenseIds| -> Result<NodeId> {
            let (w, b) = (g.param(ids.w), g.param(ids.b));
            g.dense(x, w, b)
        };
        let d = self.config.dropout;

        let mut streams = Vec::with_capacity(WeatherVariable::COUNT);
        for (tensor, layers) in weather.into_iter().zip(&self.ids.conv) {
            let mut x = g.input(tensor);
            for (spec, ids) in self.config.conv.iter().zip(layers) {
                let (w, b) = (g.param(ids.w), g.param(ids.b));
                let c = g.conv1d(x, w, b, spec.stride)?;
                x = g.relu(c);
            }
            streams.push(x);
        }
        // [B, 7 * filters, L]
        let stacked = g.concat(&streams, 1)?;
        let cnn = match (&self.ids.post_cnn, &self.ids.lstm) {
            (Some(ids), _) => {
                let width = g.value(stacked).len() / batch;
                let flat = g.reshape(stacked, &[batch, width])?;
                let h = dense(g, flat, *ids)?;
                let h = g.relu(h);
                g.dropout(h, d.after_cnn)?
            }
            (None, Some(ids)) => {
                let seq = g.swap_last_axes(stacked)?;
                let seq = g.dropout(seq, d.after_cnn)?;
                let (wi, wh, b) = (g.param(ids.w_ih), g.param(ids.w_hh), g.param(ids.b));
                let h = g.lstm(seq, wi, wh, b)?;
                g.dropout(h, d.after_lstm)?
            }
            (None, None) => unreachable!("network has a CNN head"),
        };

        let o = g.input(others);
        let o = dense(g, o, self.ids.others)?;
        let o = g.dropout(o, d.after_others)?;

        let mut x = g.concat(&[cnn, o], 1)?;
        for ids in self.ids.head {
            let h = dense(g, x, ids)?;
            x = g.relu(h);
        }
        let x = g.dropout(x, d.final_layer)?;
        dense(g, x, self.ids.out)
    }

    /// Inference-mode predictions for `rows` of `values`.
    pub fn predict_rows(&self, values: ArrayView2<f64>, rows: &[usize]) -> Result<Vec<f64>> {
        let chunks: Vec<Result<Vec<f64>>> = rows
            .par_chunks(PREDICT_CHUNK)
            .map(|chunk| {
                let (others, weather) = self.layout.batch(values, chunk);
                let mut g = Graph::new(&self.params, Mode::Inference, 0);
                let out = self.forward(&mut g, others, weather)?;
                Ok(g.value(out).data().to_vec())
            })
            .collect();
        let mut preds = Vec::with_capacity(rows.len());
        for c in chunks {
            preds.extend(c?);
        }
        Ok(preds)
    }

    /// One prediction per row of `matrix`, whose manifest must match.
    pub fn predict(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        check_manifest(&self.manifest, &matrix.manifest)?;
        let rows: Vec<usize> = (0..matrix.n_rows()).collect();
        self.predict_rows(matrix.values.view(), &rows)
    }
}

pub(crate) fn check_manifest(model: &FeatureManifest, data: &FeatureManifest) -> Result<()> {
    if model == data {
        return Ok(());
    }
    let describe = |m: &FeatureManifest| {
        m.groups
            .iter()
            .map(|g| format!("{}[{}]", g.name, g.len))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let (a, b) = (describe(model), describe(data));
    Err(Error::ManifestMismatch(if a == b {
        format!("same group widths ({a}) but different vocabularies or settings")
    } else {
        format!("model expects {a}; data has {b}")
    }))
}
