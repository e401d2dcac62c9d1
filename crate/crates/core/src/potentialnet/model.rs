use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Architecture, BatchedGraphs, ModelConfig, PotentialNetError};
use crate::featurize::{FeatureSchema, ATOM_FEATURE_DIM};
use crate::tensor::{glorot_uniform, gru_cell, linear, GruIndices, ParamSet, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    embed: Option<usize>,
    /// `messages[k][e]`: edge type `e` map of stage `k`.
    messages: Vec<Vec<usize>>,
    grus: Vec<GruIndices>,
    /// Weight of each GCN stage.
    gcn: Vec<usize>,
    gather_i: Option<(usize, usize)>,
    gather_j: Option<(usize, usize)>,
    fc: Vec<(usize, usize)>,
}

/// Network weights together with the configuration that shaped them.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    feature_dim: usize,
    schema_hash: u64,
    params: ParamSet,
    layout: Layout,
}

impl Model {
    /// Glorot-initialised weights and zero biases drawn from `config.seed`.
    pub fn new(config: &ModelConfig) -> Result<Self, PotentialNetError> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::with_rng(config, &mut rng)
    }

    pub fn with_rng(config: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<Self, PotentialNetError> {
        Self::build(config, |_, rows, cols, bias| {
            Ok(if bias {
                Tensor::zeros(rows, cols)
            } else {
                glorot_uniform(rng, rows, cols)
            })
        })
    }

    /// Lays out the network, asking `weight(name, rows, cols, is_bias)` for
    /// each tensor in storage order.
    fn build(
        config: &ModelConfig,
        mut weight: impl FnMut(&str, usize, usize, bool) -> Result<Tensor, PotentialNetError>,
    ) -> Result<Self, PotentialNetError> {
        let f = ATOM_FEATURE_DIM;
        config.validate(f)?;
        let d = config.state_dim;
        let mut p = ParamSet::new();
        let mut push = |p: &mut ParamSet, name: String, rows: usize, cols: usize, bias: bool| {
            let t = weight(&name, rows, cols, bias)?;
            Ok::<usize, PotentialNetError>(p.push(name, t))
        };
        let mut layout = Layout {
            embed: None,
            messages: Vec::new(),
            grus: Vec::new(),
            gcn: Vec::new(),
            gather_i: None,
            gather_j: None,
            fc: Vec::new(),
        };
        let head_in = match config.architecture {
            Architecture::PotentialNet => {
                if config.input_embedding {
                    layout.embed = Some(push(&mut p, "embed.w".into(), f, d, false)?);
                }
                for k in 0..config.k_layers {
                    let mut maps = Vec::with_capacity(config.n_edge_types);
                    for e in 0..config.n_edge_types {
                        maps.push(push(&mut p, format!("layer{k}.msg{e}.w"), d, d, false)?);
                    }
                    layout.messages.push(maps);
                    let mut g = |p: &mut ParamSet, name: &str, bias: bool| {
                        let rows = if bias { 1 } else { d };
                        push(p, format!("layer{k}.gru.{name}"), rows, d, bias)
                    };
                    let w_z = g(&mut p, "w_z", false)?;
                    let u_z = g(&mut p, "u_z", false)?;
                    let w_r = g(&mut p, "w_r", false)?;
                    let u_r = g(&mut p, "u_r", false)?;
                    let w_h = g(&mut p, "w_h", false)?;
                    let u_h = g(&mut p, "u_h", false)?;
                    let b_z = g(&mut p, "b_z", true)?;
                    let b_r = g(&mut p, "b_r", true)?;
                    let b_h = g(&mut p, "b_h", true)?;
                    layout.grus.push(GruIndices {
                        w_z,
                        u_z,
                        b_z,
                        w_r,
                        u_r,
                        b_r,
                        w_h,
                        u_h,
                        b_h,
                    });
                }
                let g = config.gather_dim;
                let iw = push(&mut p, "gather.i.w".into(), d + f, g, false)?;
                let ib = push(&mut p, "gather.i.b".into(), 1, g, true)?;
                let jw = push(&mut p, "gather.j.w".into(), d, g, false)?;
                let jb = push(&mut p, "gather.j.b".into(), 1, g, true)?;
                layout.gather_i = Some((iw, ib));
                layout.gather_j = Some((jw, jb));
                g
            }
            Architecture::Gcnn => {
                let mut fan_in = f;
                for k in 0..config.k_layers {
                    layout
                        .gcn
                        .push(push(&mut p, format!("gcn{k}.w"), fan_in, d, false)?);
                    fan_in = d;
                }
                d
            }
        };
        let mut fan_in = head_in;
        for (l, &width) in config.fc_dims.iter().enumerate() {
            let w = push(&mut p, format!("fc{l}.w"), fan_in, width, false)?;
            let b = push(&mut p, format!("fc{l}.b"), 1, width, true)?;
            layout.fc.push((w, b));
            fan_in = width;
        }
        Ok(Model {
            config: config.clone(),
            feature_dim: f,
            schema_hash: FeatureSchema::standard().hash(),
            params: p,
            layout,
        })
    }

    fn param_count(config: &ModelConfig) -> Option<usize> {
        let head = config.fc_dims.len().checked_mul(2)?;
        let body = match config.architecture {
            Architecture::PotentialNet => config
                .k_layers
                .checked_mul(config.n_edge_types.checked_add(9)?)?
                .checked_add(4 + usize::from(config.input_embedding))?,
            Architecture::Gcnn => config.k_layers,
        };
        body.checked_add(head)
    }

    /// Rebuilds a model from stored weights, checking every name and shape
    /// against what `config` implies.
    pub fn from_params(config: &ModelConfig, params: ParamSet) -> Result<Self, PotentialNetError> {
        let expected = Self::param_count(config);
        if expected != Some(params.len()) {
            return Err(PotentialNetError::ParamMismatch(format!(
                "expected {} tensors, found {}",
                expected.map_or_else(|| "too many".to_string(), |n| n.to_string()),
                params.len()
            )));
        }
        let mut stored = params.iter();
        Self::build(config, |name, rows, cols, _| {
            let got = stored
                .next()
                .ok_or_else(|| PotentialNetError::ParamMismatch(format!("missing {name}")))?;
            if got.name != name || got.value.shape() != (rows, cols) {
                return Err(PotentialNetError::ParamMismatch(format!(
                    "expected {name} {:?}, found {} {:?}",
                    (rows, cols),
                    got.name,
                    got.value.shape()
                )));
            }
            Ok(got.value.clone())
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    #[cfg(test)]
    pub(crate) fn with_schema_hash(mut self, hash: u64) -> Self {
        self.schema_hash = hash;
        self
    }

    pub fn schema_hash(&self) -> u64 {
        self.schema_hash
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn n_tasks(&self) -> usize {
        self.config.n_tasks()
    }

    fn check_schema(&self, batch: &BatchedGraphs) -> Result<(), PotentialNetError> {
        if batch.schema_hash != self.schema_hash || batch.x.cols() != self.feature_dim {
            return Err(PotentialNetError::SchemaMismatch {
                expected: self.schema_hash,
                found: batch.schema_hash,
            });
        }
        Ok(())
    }

    /// Builds the network on `tape` with the weights bound at `bound` and the
    /// atom features at `x`; returns the n_molecules × n_tasks output.
    pub fn forward_on(
        &self,
        tape: &mut Tape,
        bound: &[Var],
        x: Var,
        batch: &BatchedGraphs,
    ) -> Result<Var, PotentialNetError> {
        self.check_schema(batch)?;
        let l = &self.layout;
        let graph_vec = match self.config.architecture {
            Architecture::PotentialNet => {
                let mut h = match l.embed {
                    Some(w) => tape.matmul(x, bound[w])?,
                    None => x,
                };
                for (k, gru) in l.grus.iter().enumerate() {
                    let mut m: Option<Var> = None;
                    for (e, &w) in l.messages[k].iter().enumerate() {
                        if batch.edges[e].is_empty() {
                            continue;
                        }
                        let hw = tape.matmul(h, bound[w])?;
                        let me = tape.neighbor_sum(hw, batch.edges[e].clone())?;
                        m = Some(match m {
                            Some(acc) => tape.add(acc, me)?,
                            None => me,
                        });
                    }
                    let m = match m {
                        Some(m) => m,
                        None => {
                            let (r, c) = tape.value(h).shape();
                            tape.leaf(Tensor::zeros(r, c))
                        }
                    };
                    h = gru_cell(tape, h, m, &gru.vars(bound))?;
                }
                let (iw, ib) = l.gather_i.expect("potentialnet layout");
                let (jw, jb) = l.gather_j.expect("potentialnet layout");
                let hx = tape.concat_cols(h, x)?;
                let gate = linear(tape, hx, bound[iw], Some(bound[ib]))?;
                let gate = tape.sigmoid(gate)?;
                let value = linear(tape, h, bound[jw], Some(bound[jb]))?;
                let atom_out = tape.hadamard(gate, value)?;
                tape.segment_sum(atom_out, &batch.segment_ids)?
            }
            Architecture::Gcnn => {
                let mut h = x;
                for &w in &l.gcn {
                    let agg = tape.neighbor_sum(h, batch.self_loop_edges.clone())?;
                    let z = tape.matmul(agg, bound[w])?;
                    h = tape.relu(z)?;
                }
                tape.segment_sum(h, &batch.segment_ids)?
            }
        };
        let mut out = graph_vec;
        let last = l.fc.len() - 1;
        for (i, &(w, b)) in l.fc.iter().enumerate() {
            out = linear(tape, out, bound[w], Some(bound[b]))?;
            if i < last {
                out = tape.relu(out)?;
            }
        }
        Ok(out)
    }

    /// Standardized-scale predictions, n_molecules × n_tasks.
    pub fn forward(&self, batch: &BatchedGraphs) -> Result<Tensor, PotentialNetError> {
        let mut tape = Tape::inference();
        let bound = self.params.bind(&mut tape);
        let x = tape.leaf(batch.x.clone());
        let out = self.forward_on(&mut tape, &bound, x, batch)?;
        Ok(tape.value(out).clone())
    }
}

/// Mean squared error over cells with `mask = 1`; 0 when nothing is observed.
/// Missing label cells may hold any finite value.
pub fn masked_loss(
    tape: &mut Tape,
    pred: Var,
    labels: &Tensor,
    mask: &Tensor,
) -> Result<Var, PotentialNetError> {
    let observed = mask.sum();
    let diff = tape.sub_const(pred, labels)?;
    let masked = tape.mul_const(diff, mask.clone())?;
    let sq = tape.hadamard(masked, masked)?;
    let total = tape.sum_all(sq)?;
    let scale = if observed > 0.0 { 1.0 / observed } else { 0.0 };
    Ok(tape.scale(total, scale)?)
}
