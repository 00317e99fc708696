//! Approximate label matching.
//!
//! Training proceeds in three stages. A global classifier `g` is trained on
//! the pooled sources; it is assumed to beat random guessing on the target.
//! Each source also trains its own local classifier `f_i`. Then, for every
//! source, a transformation `phi_i` is fitted so that `f_i(phi_i(x))` agrees
//! with `g(x)` on the unlabeled target points, by minimizing
//!
//! ```text
//! sum_j (g(x_j) - f_i(phi_i(x_j)))^2
//! ```
//!
//! with `f_i` frozen. `phi_i` is realized as one or more linear layers
//! prepended to `f_i`, initialized to the exact identity so fitting starts
//! from plain `f_i` transfer; optionally it is constrained to a rotation by
//! projecting onto the nearest rotation matrix after every gradient step.
//! Prediction takes the sign of the summed adapted scores.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::baselines::confidence_vote;
use crate::nn::io::{fmt_f64, LineReader};
use crate::nn::{mlp_init, Activation, DenseLayer, FeedForwardNet, TrainConfig};
use crate::seed::derive_seed;
use crate::{Error, MultiDomainSet, Result};

/// The family the fitted transformation is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    /// Unconstrained linear layers (weights and bias free).
    FreeLinear,
    /// A single proper rotation: square weight matrix with `RᵀR = I`,
    /// `det R = +1`, and zero bias.
    Rotation,
}

impl TransformKind {
    pub fn name(self) -> &'static str {
        match self {
            TransformKind::FreeLinear => "free_linear",
            TransformKind::Rotation => "rotation",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "free_linear" => Ok(TransformKind::FreeLinear),
            "rotation" => Ok(TransformKind::Rotation),
            other => Err(Error::Spec(format!("unknown transform kind '{other}'"))),
        }
    }
}

/// How to build and fit the prepended transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformSpec {
    pub kind: TransformKind,
    /// Number of prepended linear layers.
    pub depth: usize,
    pub train: TrainConfig,
}

impl Default for TransformSpec {
    fn default() -> Self {
        Self {
            kind: TransformKind::FreeLinear,
            depth: 1,
            // The alignment objective is trained without weight decay.
            train: TrainConfig {
                l2_penalty: 0.0,
                ..TrainConfig::default()
            },
        }
    }
}

impl TransformSpec {
    fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Spec("transform depth must be >= 1".into()));
        }
        if self.kind == TransformKind::Rotation && self.depth != 1 {
            return Err(Error::Spec(format!(
                "rotation transform requires depth 1, got {}",
                self.depth
            )));
        }
        self.train.validate()
    }
}

/// Result of projecting a matrix onto the rotation group.
#[derive(Debug, Clone)]
pub struct RotationProjection {
    pub rotation: DMatrix<f64>,
    /// Set when the input was (numerically) rank deficient, in which case the
    /// nearest rotation is not unique; the returned one is still valid.
    pub rank_deficient: bool,
}

/// Projects a square matrix onto the nearest proper rotation (Frobenius
/// distance): from `M = UΣVᵀ`, returns `U·diag(1,…,1,det(UVᵀ))·Vᵀ`.
pub fn project_rotation(m: &DMatrix<f64>) -> Result<RotationProjection> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "rotation projection needs a nonempty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite matrix entry".into()));
    }
    let svd = m.clone().svd(true, true);
    let mut u = svd
        .u
        .ok_or_else(|| Error::Numeric("SVD did not produce U".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numeric("SVD did not produce Vᵀ".into()))?;
    let sv = svd.singular_values;
    let rank_deficient = sv.max() == 0.0 || sv.min() <= 1e-12 * sv.max();

    if (&u * &v_t).determinant() < 0.0 {
        // Flip the column paired with the smallest singular value
        // (nalgebra sorts them in descending order).
        let last = u.ncols() - 1;
        u.column_mut(last).neg_mut();
    }
    Ok(RotationProjection {
        rotation: u * v_t,
        rank_deficient,
    })
}

/// A source's local classifier together with its fitted transformation: the
/// frozen `f_i` behind the prepended `phi_i` layers.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedSourceModel {
    phi: FeedForwardNet,
    base: FeedForwardNet,
    objective_initial: f64,
    objective_final: f64,
}

impl AdaptedSourceModel {
    fn from_fused(fused: &FeedForwardNet, depth: usize, initial: f64, fin: f64) -> Self {
        let (front, back) = fused.split_at(depth);
        Self {
            phi: FeedForwardNet::from_layers(front).expect("phi layers chain"),
            base: FeedForwardNet::from_layers(back).expect("base layers chain"),
            objective_initial: initial,
            objective_final: fin,
        }
    }

    /// The prepended transformation layers (identity activation).
    pub fn phi(&self) -> &FeedForwardNet {
        &self.phi
    }

    /// The frozen local classifier, bit-identical to the `f_i` that was
    /// passed to [`fit_phi`].
    pub fn base(&self) -> &FeedForwardNet {
        &self.base
    }

    /// Alignment objective at the identity initialization.
    pub fn objective_initial(&self) -> f64 {
        self.objective_initial
    }

    /// Alignment objective of the returned transformation.
    pub fn objective_final(&self) -> f64 {
        self.objective_final
    }

    /// The adapted score `f_i(phi_i(x))`.
    pub fn score(&self, x: &DVector<f64>) -> Result<f64> {
        self.base.forward(&self.phi.forward_vec(x)?)
    }

    pub fn input_dim(&self) -> usize {
        self.phi.input_dim()
    }
}

/// Alignment objective: the sum over rows of the squared difference between
/// the approximate labels and the net's scores. Accumulated in row order.
fn alignment_objective(net: &FeedForwardNet, x: &DMatrix<f64>, labels: &DVector<f64>) -> f64 {
    let scores = net.forward_rows(x).expect("shapes validated by caller");
    let mut total = 0.0;
    for j in 0..x.nrows() {
        let diff = labels[j] - scores[j];
        total += diff * diff;
    }
    total
}

/// Fits the transformation for one source: prepends `spec.depth` linear
/// layers (initialized to the exact identity) to a frozen copy of `base`,
/// then trains the fused net on `(x, global_net(x))` pairs over the target
/// features. For rotation-constrained transforms the weight matrix is
/// projected onto the nearest rotation after every gradient step.
///
/// The returned model records the alignment objective at initialization and
/// after fitting; of all epoch-end iterates (including the identity start)
/// the one with the lowest objective is returned, so fitting never ends
/// worse than plain `base` transfer.
pub fn fit_phi(
    base: &FeedForwardNet,
    global_net: &FeedForwardNet,
    target_x: &DMatrix<f64>,
    spec: &TransformSpec,
) -> Result<AdaptedSourceModel> {
    fit_phi_observed(base, global_net, target_x, spec, |_| {})
}

/// [`fit_phi`] with a step observer: `observe` sees the first phi layer's
/// weight matrix after every mini-batch update (post projection).
pub(crate) fn fit_phi_observed(
    base: &FeedForwardNet,
    global_net: &FeedForwardNet,
    target_x: &DMatrix<f64>,
    spec: &TransformSpec,
    mut observe: impl FnMut(&DMatrix<f64>),
) -> Result<AdaptedSourceModel> {
    spec.validate()?;
    let d = base.input_dim();
    if global_net.input_dim() != d {
        return Err(Error::Dimension(format!(
            "global net expects {} inputs, local net {}",
            global_net.input_dim(),
            d
        )));
    }
    if target_x.ncols() != d {
        return Err(Error::Dimension(format!(
            "target features have {} columns, nets expect {}",
            target_x.ncols(),
            d
        )));
    }
    if target_x.nrows() == 0 {
        return Err(Error::Domain("target has no rows".into()));
    }

    let mut layers = Vec::with_capacity(spec.depth + base.layers().len());
    for _ in 0..spec.depth {
        layers.push(DenseLayer::identity(d));
    }
    for l in base.layers() {
        layers.push(l.clone().with_trainable(false));
    }
    let fused = FeedForwardNet::from_layers(layers)?;

    // Approximate labels: g's raw scores on the target.
    let labels = global_net.forward_rows(target_x)?;

    let objective_initial = alignment_objective(&fused, target_x, &labels);
    if spec.train.epochs == 0 {
        return Ok(AdaptedSourceModel::from_fused(
            &fused,
            spec.depth,
            objective_initial,
            objective_initial,
        ));
    }

    let rotate = spec.kind == TransformKind::Rotation;
    let mut hook_err: Option<Error> = None;
    let mut best = fused.clone();
    let mut best_objective = objective_initial;
    fused.train_with_hooks(
        target_x,
        &labels,
        &spec.train,
        |net| {
            if hook_err.is_some() {
                return;
            }
            if rotate {
                match project_rotation(net.layers()[0].weights()) {
                    Ok(p) => {
                        net.layer_mut(0).set_weights(p.rotation);
                        net.layer_mut(0).zero_bias();
                    }
                    Err(e) => {
                        hook_err = Some(e);
                        return;
                    }
                }
            }
            observe(net.layers()[0].weights());
        },
        |net, _| {
            let objective = alignment_objective(net, target_x, &labels);
            if objective < best_objective {
                best_objective = objective;
                best = net.clone();
            }
        },
    )?;
    if let Some(e) = hook_err {
        return Err(e);
    }

    Ok(AdaptedSourceModel::from_fused(
        &best,
        spec.depth,
        objective_initial,
        best_objective,
    ))
}

/// Architecture of one classifier: hidden tanh layers plus the output
/// activation. The output layer always has a single unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierArch {
    pub hidden: Vec<usize>,
    pub output: Activation,
}

impl ClassifierArch {
    /// A tanh MLP with the given hidden layer sizes.
    pub fn mlp(hidden: Vec<usize>) -> Self {
        Self {
            hidden,
            output: Activation::Tanh,
        }
    }

    /// Logistic regression on ±1 labels: no hidden layer, sigmoid output
    /// rescaled to (−1, 1).
    pub fn logistic() -> Self {
        Self {
            hidden: Vec::new(),
            output: Activation::Sigmoid,
        }
    }

    /// Instantiates the net for input dimension `d`.
    pub fn build(&self, d: usize, seed: u64) -> Result<FeedForwardNet> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(d);
        sizes.extend_from_slice(&self.hidden);
        sizes.push(1);
        let mut acts = vec![Activation::Tanh; self.hidden.len()];
        acts.push(self.output);
        mlp_init(&sizes, &acts, seed)
    }
}

/// Architectures for the global classifier `g` and the per-source `f_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmArch {
    pub global: ClassifierArch,
    pub local: ClassifierArch,
}

impl AlmArch {
    /// Same MLP architecture for `g` and every `f_i`.
    pub fn shared(hidden: Vec<usize>) -> Self {
        Self {
            global: ClassifierArch::mlp(hidden.clone()),
            local: ClassifierArch::mlp(hidden),
        }
    }
}

/// The fitted multi-source model: the global classifier plus one adapted
/// model per source, stored in a canonical content order so predictions do
/// not depend on how the caller ordered the sources.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmModel {
    global_net: FeedForwardNet,
    adapted: Vec<AdaptedSourceModel>,
    transform: TransformSpec,
}

impl AlmModel {
    pub(crate) fn from_parts(
        global_net: FeedForwardNet,
        adapted: Vec<AdaptedSourceModel>,
        transform: TransformSpec,
    ) -> Self {
        Self {
            global_net,
            adapted,
            transform,
        }
    }

    pub fn global_net(&self) -> &FeedForwardNet {
        &self.global_net
    }

    pub fn adapted(&self) -> &[AdaptedSourceModel] {
        &self.adapted
    }

    pub fn transform(&self) -> &TransformSpec {
        &self.transform
    }

    pub fn num_sources(&self) -> usize {
        self.adapted.len()
    }

    pub fn input_dim(&self) -> usize {
        self.global_net.input_dim()
    }

    /// The adapted scores `f_i(phi_i(x))`, one per source.
    pub fn adapted_scores(&self, x: &DVector<f64>) -> Result<Vec<f64>> {
        self.adapted.iter().map(|a| a.score(x)).collect()
    }

    /// Consensus prediction: the sign of the summed adapted scores
    /// (an exact zero sum predicts +1).
    pub fn predict_consensus(&self, x: &DVector<f64>) -> Result<f64> {
        confidence_vote(&self.adapted_scores(x)?)
    }

    /// Consensus predictions for every row.
    pub fn predict_rows(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(x.nrows());
        for i in 0..x.nrows() {
            out[i] = self.predict_consensus(&x.row(i).transpose())?;
        }
        Ok(out)
    }
}

/// Consensus prediction for a single point (see [`AlmModel::predict_consensus`]).
pub fn predict_consensus(model: &AlmModel, x: &DVector<f64>) -> Result<f64> {
    model.predict_consensus(x)
}

/// Canonical processing order: sources sorted by content hash, ties by
/// original index. Returns the original indices.
pub(crate) fn canonical_order(hashes: &[u64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..hashes.len()).collect();
    idx.sort_by_key(|&i| (hashes[i], i));
    idx
}

/// The transform spec a given source's phi fit runs under: the caller's spec
/// with the training seed tied to the source content.
pub(crate) fn phi_spec_for_source(spec: &TransformSpec, seed: u64, source_hash: u64) -> TransformSpec {
    let mut spec_i = spec.clone();
    spec_i.train.seed = derive_seed(seed, "phi-train", source_hash);
    spec_i
}

/// Trains the global classifier on the row-concatenation of the sources,
/// taken in canonical content order so the result is invariant to source
/// reordering.
pub fn train_global(
    data: &MultiDomainSet,
    arch: &ClassifierArch,
    cfg: &TrainConfig,
) -> Result<FeedForwardNet> {
    let d = data.dim();
    let hashes: Vec<u64> = data.sources().iter().map(|s| s.content_hash()).collect();
    let order = canonical_order(&hashes);

    let total: usize = data.sources().iter().map(|s| s.len()).sum();
    let mut x = DMatrix::zeros(total, d);
    let mut y = DVector::zeros(total);
    let mut row = 0;
    for &i in &order {
        let s = &data.sources()[i];
        let labels = s.labels_required()?;
        for r in 0..s.len() {
            x.row_mut(row).copy_from(&s.features().row(r));
            y[row] = labels[r];
            row += 1;
        }
    }

    let mut pooled_salt = 0u64;
    for &i in &order {
        pooled_salt = derive_seed(pooled_salt, "pool", hashes[i]);
    }
    let init_seed = derive_seed(cfg.seed, "global-init", pooled_salt);
    let train_seed = derive_seed(cfg.seed, "global-train", pooled_salt);

    let net = arch.build(d, init_seed)?;
    net.train(&x, &y, &cfg.clone().with_seed(train_seed))
}

/// Trains one source's local classifier with seeds tied to the source's
/// content.
pub fn train_local(
    source: &crate::Domain,
    arch: &ClassifierArch,
    cfg: &TrainConfig,
) -> Result<FeedForwardNet> {
    let salt = source.content_hash();
    let init_seed = derive_seed(cfg.seed, "local-init", salt);
    let train_seed = derive_seed(cfg.seed, "local-train", salt);
    let net = arch.build(source.dim(), init_seed)?;
    net.train(
        source.features(),
        source.labels_required()?,
        &cfg.clone().with_seed(train_seed),
    )
}

/// Runs the full pipeline: trains `g` on the pooled sources, a local
/// classifier per source, and a transformation per source against the target
/// features; assembles the consensus model.
///
/// All sub-model seeds derive from `cfg.seed` and each source's content
/// hash, so permuting the source list changes nothing.
pub fn fit_alm(
    data: &MultiDomainSet,
    arch: &AlmArch,
    spec: &TransformSpec,
    cfg: &TrainConfig,
) -> Result<AlmModel> {
    spec.validate()?;
    cfg.validate()?;

    let global_net = train_global(data, &arch.global, cfg)?;

    let hashes: Vec<u64> = data.sources().iter().map(|s| s.content_hash()).collect();
    let order = canonical_order(&hashes);

    let mut adapted = Vec::with_capacity(order.len());
    for &i in &order {
        let source = &data.sources()[i];
        let local = train_local(source, &arch.local, cfg).map_err(|e| Error::for_source(i, e))?;
        let spec_i = phi_spec_for_source(spec, cfg.seed, hashes[i]);
        let model = fit_phi(&local, &global_net, data.target().features(), &spec_i)
            .map_err(|e| Error::for_source(i, e))?;
        adapted.push(model);
    }

    Ok(AlmModel::from_parts(global_net, adapted, spec.clone()))
}

// --- model persistence ----------------------------------------------------

impl AlmModel {
    /// Writes the model: a manifest (source count, input dimension,
    /// transform spec, per-source alignment objectives) followed by each
    /// sub-net in the flat text format.
    pub fn write_text<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "alm-model 1")?;
        writeln!(out, "k {}", self.adapted.len())?;
        writeln!(out, "d {}", self.input_dim())?;
        writeln!(
            out,
            "transform {} {}",
            self.transform.kind.name(),
            self.transform.depth
        )?;
        let t = &self.transform.train;
        writeln!(
            out,
            "phi-train {} {} {} {} {}",
            fmt_f64(t.learning_rate),
            t.epochs,
            t.batch_size,
            fmt_f64(t.l2_penalty),
            t.seed
        )?;
        for (i, a) in self.adapted.iter().enumerate() {
            writeln!(
                out,
                "objective {i} {} {}",
                fmt_f64(a.objective_initial),
                fmt_f64(a.objective_final)
            )?;
        }
        writeln!(out, "global")?;
        self.global_net.write_text(out)?;
        for (i, a) in self.adapted.iter().enumerate() {
            writeln!(out, "phi {i}")?;
            a.phi.write_text(out)?;
            writeln!(out, "base {i}")?;
            a.base.write_text(out)?;
        }
        Ok(())
    }

    /// Reads a model written by [`AlmModel::write_text`].
    pub fn read_text<R: BufRead>(input: R, name: &str) -> Result<Self> {
        let mut lines = LineReader::new(input, name);

        let header = lines.expect_line("alm-model header")?;
        if header != "alm-model 1" {
            return Err(lines.error(format!("expected 'alm-model 1', got '{header}'")));
        }
        let k: usize = parse_kv(&mut lines, "k")?;
        let d: usize = parse_kv(&mut lines, "d")?;

        let tline = lines.expect_line("transform line")?;
        let (kind, depth) = match tline.split_whitespace().collect::<Vec<_>>()[..] {
            ["transform", kind, depth] => (
                TransformKind::parse(kind).map_err(|e| lines.error(e.to_string()))?,
                depth
                    .parse::<usize>()
                    .map_err(|_| lines.error(format!("bad depth '{depth}'")))?,
            ),
            _ => {
                return Err(
                    lines.error(format!("expected 'transform <kind> <depth>', got '{tline}'"))
                )
            }
        };
        let pline = lines.expect_line("phi-train line")?;
        let train = match pline.split_whitespace().collect::<Vec<_>>()[..] {
            ["phi-train", lr, epochs, batch, l2, seed] => TrainConfig {
                learning_rate: parse_num(&lines, lr)?,
                epochs: parse_num(&lines, epochs)?,
                batch_size: parse_num(&lines, batch)?,
                l2_penalty: parse_num(&lines, l2)?,
                seed: parse_num(&lines, seed)?,
            },
            _ => return Err(lines.error(format!("expected 'phi-train ...', got '{pline}'"))),
        };

        let mut objectives = Vec::with_capacity(k);
        for i in 0..k {
            let oline = lines.expect_line("objective line")?;
            match oline.split_whitespace().collect::<Vec<_>>()[..] {
                ["objective", idx, initial, fin] if idx == i.to_string() => {
                    objectives.push((
                        parse_num::<f64, _>(&lines, initial)?,
                        parse_num::<f64, _>(&lines, fin)?,
                    ));
                }
                _ => {
                    return Err(
                        lines.error(format!("expected 'objective {i} ...', got '{oline}'"))
                    )
                }
            }
        }

        expect_tag(&mut lines, "global")?;
        let global_net = lines.read_net()?;
        if global_net.input_dim() != d || global_net.output_dim() != 1 {
            return Err(lines.error(format!(
                "global net maps {} -> {}, expected {d} -> 1",
                global_net.input_dim(),
                global_net.output_dim()
            )));
        }

        let mut adapted = Vec::with_capacity(k);
        for (i, &(objective_initial, objective_final)) in objectives.iter().enumerate() {
            expect_tag(&mut lines, &format!("phi {i}"))?;
            let phi = lines.read_net()?;
            expect_tag(&mut lines, &format!("base {i}"))?;
            let base = lines.read_net()?;
            if phi.input_dim() != d || phi.output_dim() != base.input_dim() {
                return Err(lines.error(format!("sub-model {i} dimensions do not chain")));
            }
            if base.output_dim() != 1 {
                return Err(lines.error(format!("sub-model {i} base must output one score")));
            }
            if phi
                .layers()
                .iter()
                .any(|l| l.activation() != Activation::Identity)
            {
                return Err(lines.error(format!(
                    "sub-model {i} phi layers must use the identity activation"
                )));
            }
            adapted.push(AdaptedSourceModel {
                phi,
                base,
                objective_initial,
                objective_final,
            });
        }

        Ok(AlmModel {
            global_net,
            adapted,
            transform: TransformSpec { kind, depth, train },
        })
    }
}

fn expect_tag<R: BufRead>(lines: &mut LineReader<R>, tag: &str) -> Result<()> {
    let line = lines.expect_line(tag)?;
    if line != tag {
        return Err(lines.error(format!("expected '{tag}', got '{line}'")));
    }
    Ok(())
}

fn parse_kv<R: BufRead>(lines: &mut LineReader<R>, key: &str) -> Result<usize> {
    let line = lines.expect_line(key)?;
    match line.split_whitespace().collect::<Vec<_>>()[..] {
        [k, v] if k == key => v
            .parse()
            .map_err(|_| lines.error(format!("bad value for '{key}'"))),
        _ => Err(lines.error(format!("expected '{key} <value>', got '{line}'"))),
    }
}

fn parse_num<T: std::str::FromStr, R: BufRead>(lines: &LineReader<R>, tok: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| lines.error(format!("bad number '{tok}'")))
}
