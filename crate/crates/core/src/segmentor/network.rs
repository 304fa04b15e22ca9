use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{SegmentorConfig, VOXEL_INPUT_FEATURES};
use super::loss::{argmax_labels, voxel_cross_entropy_sum};
use crate::geometry::PointCloud;
use crate::raster::{devoxelize_rows, voxelize, VoxelMode, Voxelization};
use crate::sparse::{
    build_kernel_map, conv, conv_backward_raw, output_coords, ConvSpec, ConvWeights, Coords, Dataflow, Element,
    ExecMode, KernelMap, SparseTensor,
};
use crate::{ClassId, Error, Result};

/// A named slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamEntry {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Copy)]
struct LinearLayer {
    w: usize,
    b: usize,
    c_in: usize,
    c_out: usize,
}

#[derive(Debug, Clone, Copy)]
struct ConvLayer {
    w: usize,
    b: usize,
    volume: usize,
    c_in: usize,
    c_out: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    entries: Vec<ParamEntry>,
    stem: LinearLayer,
    blocks: Vec<Vec<(ConvLayer, ConvLayer)>>,
    /// Indexed by `level - 1`.
    down: Vec<ConvLayer>,
    up: Vec<ConvLayer>,
    fuse: Vec<LinearLayer>,
    head: LinearLayer,
    total: usize,
}

#[derive(Default)]
struct LayoutBuilder {
    entries: Vec<ParamEntry>,
    total: usize,
}

impl LayoutBuilder {
    fn entry(&mut self, name: String, len: usize) -> usize {
        let offset = self.total;
        self.entries.push(ParamEntry { name, offset, len });
        self.total += len;
        offset
    }

    fn linear(&mut self, name: &str, c_in: usize, c_out: usize) -> LinearLayer {
        LinearLayer {
            w: self.entry(format!("{name}.weight"), c_in * c_out),
            b: self.entry(format!("{name}.bias"), c_out),
            c_in,
            c_out,
        }
    }

    fn conv(&mut self, name: &str, volume: usize, c_in: usize, c_out: usize) -> ConvLayer {
        ConvLayer {
            w: self.entry(format!("{name}.weight"), volume * c_in * c_out),
            b: self.entry(format!("{name}.bias"), c_out),
            volume,
            c_in,
            c_out,
        }
    }
}

impl Layout {
    fn new(cfg: &SegmentorConfig) -> Self {
        let dim = cfg.voxel.axes() as u32;
        let (k3, k2) = (3usize.pow(dim), 2usize.pow(dim));
        let w = &cfg.widths;
        let mut b = LayoutBuilder::default();
        let stem = b.linear("stem", VOXEL_INPUT_FEATURES, w[0]);
        let mut blocks = Vec::new();
        let mut down = Vec::new();
        for level in 0..cfg.levels() {
            if level > 0 {
                down.push(b.conv(&format!("down{level}"), k2, w[level - 1], w[level]));
            }
            blocks.push(
                (0..cfg.depths[level])
                    .map(|i| {
                        let name = format!("level{level}.block{i}");
                        (
                            b.conv(&format!("{name}.conv1"), k3, w[level], w[level]),
                            b.conv(&format!("{name}.conv2"), k3, w[level], w[level]),
                        )
                    })
                    .collect(),
            );
        }
        let mut up = Vec::new();
        let mut fuse = Vec::new();
        for level in (1..cfg.levels()).rev() {
            up.push(b.conv(&format!("up{level}"), k2, w[level], w[level - 1]));
            fuse.push(b.linear(&format!("fuse{level}"), 2 * w[level - 1], w[level - 1]));
        }
        up.reverse();
        fuse.reverse();
        let head = b.linear("head", w[0], cfg.num_classes);
        Layout {
            entries: b.entries,
            stem,
            blocks,
            down,
            up,
            fuse,
            head,
            total: b.total,
        }
    }

    /// Weight entries and their fan-in (`kernel volume * c_in`).
    fn fan_in(&self) -> Vec<(usize, usize, usize)> {
        let mut out = vec![(self.stem.w, self.stem.c_in * self.stem.c_out, self.stem.c_in)];
        let mut conv = |c: &ConvLayer| out.push((c.w, c.volume * c.c_in * c.c_out, c.volume * c.c_in));
        for (a, b) in self.blocks.iter().flatten() {
            conv(a);
            conv(b);
        }
        self.down.iter().chain(&self.up).for_each(&mut conv);
        for l in self.fuse.iter().chain(std::iter::once(&self.head)) {
            out.push((l.w, l.c_in * l.c_out, l.c_in));
        }
        out
    }
}

/// Voxelization, per-level coordinates and kernel maps for one cloud.
/// Everything here depends only on geometry, so a plan can be reused across
/// training steps.
#[derive(Debug, Clone)]
pub struct Plan {
    pub voxels: Voxelization,
    features: Vec<f64>,
    /// Coordinates of every encoder level, finest first.
    pub levels: Vec<Coords>,
    sub_maps: Vec<KernelMap>,
    down_maps: Vec<KernelMap>,
    up_maps: Vec<KernelMap>,
}

impl Plan {
    pub fn build(cloud: &PointCloud, cfg: &SegmentorConfig) -> Result<Self> {
        cfg.validate()?;
        let voxels = voxelize(cloud, &cfg.voxel)?;
        let features = voxel_local_features(cloud, &voxels, cfg)?;
        let dim = voxels.coords.dim();
        let mut levels = vec![voxels.coords.clone()];
        let mut sub_maps = Vec::new();
        let mut down_maps = Vec::new();
        let mut up_maps = Vec::new();
        let sub = ConvSpec::submanifold(3, dim, 1, 1);
        let down = ConvSpec::generalized(2, dim, 2, 1, 1);
        for level in 0..cfg.levels() {
            if level > 0 {
                let fine = &levels[level - 1];
                let coarse = output_coords(fine, &down)?;
                let map = build_kernel_map(fine, &coarse, &down)?;
                up_maps.push(map.transpose(fine)?);
                down_maps.push(map);
                levels.push(coarse);
            }
            sub_maps.push(build_kernel_map(&levels[level], &levels[level], &sub)?);
        }
        Ok(Plan {
            voxels,
            features,
            levels,
            sub_maps,
            down_maps,
            up_maps,
        })
    }

    pub fn voxel_count(&self) -> usize {
        self.levels[0].len()
    }

    pub fn point_count(&self) -> usize {
        self.voxels.map.point_count()
    }

    fn map(&self, r: MapRef) -> (&KernelMap, &Coords) {
        match r {
            MapRef::Sub(l) => (&self.sub_maps[l], &self.levels[l]),
            MapRef::Down(l) => (&self.down_maps[l - 1], &self.levels[l - 1]),
            MapRef::Up(l) => (&self.up_maps[l - 1], &self.levels[l]),
        }
    }
}

fn voxel_local_features(cloud: &PointCloud, vox: &Voxelization, cfg: &SegmentorConfig) -> Result<Vec<f64>> {
    let scale: [f64; 3] = match cfg.voxel.mode {
        VoxelMode::Cartesian => [cfg.voxel.cell_size[0], cfg.voxel.cell_size[1], cfg.voxel.cell_size[2]],
        VoxelMode::Cylindrical | VoxelMode::PolarBev => [1.0; 3],
    };
    let mut out = Vec::with_capacity(vox.coords.len() * VOXEL_INPUT_FEATURES);
    for (v, cell) in vox.coords.iter().enumerate() {
        let members = vox.map.members(v);
        let mut acc = [0.0; 4];
        for &p in members {
            let pos = cloud.positions()[p as usize];
            for a in 0..3 {
                acc[a] += pos[a];
            }
            acc[3] += cloud.intensity()[p as usize];
        }
        let n = members.len() as f64;
        let center = cfg.voxel.cell_center(cell);
        for a in 0..3 {
            out.push((acc[a] / n - center[a]) / scale[a]);
        }
        out.push(acc[3] / n);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
enum MapRef {
    Sub(usize),
    Down(usize),
    Up(usize),
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Linear {
        layer: LinearLayer,
        x: usize,
        out: usize,
    },
    Conv {
        layer: ConvLayer,
        map: MapRef,
        x: usize,
        out: usize,
    },
    Relu {
        x: usize,
        out: usize,
    },
    Add {
        a: usize,
        b: usize,
        out: usize,
    },
    Concat {
        a: usize,
        b: usize,
        out: usize,
    },
}

struct Node<T> {
    data: Vec<T>,
    channels: usize,
}

/// Recorded forward pass, replayed in reverse for gradients.
struct Tape<'a, T: Element> {
    model: &'a Segmentor<T>,
    plan: &'a Plan,
    nodes: Vec<Node<T>>,
    ops: Vec<Op>,
}

impl<'a, T: Element> Tape<'a, T> {
    fn new(model: &'a Segmentor<T>, plan: &'a Plan) -> Self {
        Self {
            model,
            plan,
            nodes: Vec::new(),
            ops: Vec::new(),
        }
    }

    fn push(&mut self, data: Vec<T>, channels: usize) -> usize {
        self.nodes.push(Node { data, channels });
        self.nodes.len() - 1
    }

    fn param(&self, offset: usize, len: usize) -> &'a [T] {
        &self.model.params[offset..offset + len]
    }

    fn linear(&mut self, layer: LinearLayer, x: usize) -> usize {
        let w = self.param(layer.w, layer.c_in * layer.c_out);
        let b = self.param(layer.b, layer.c_out);
        let input = &self.nodes[x].data;
        let mut out = Vec::with_capacity(input.len() / layer.c_in * layer.c_out);
        let mut acc = vec![0.0; layer.c_out];
        for row in input.chunks_exact(layer.c_in) {
            acc.iter_mut().zip(b).for_each(|(a, b)| *a = b.to_f64());
            for (ci, v) in row.iter().enumerate() {
                let v = v.to_f64();
                for (a, w) in acc.iter_mut().zip(&w[ci * layer.c_out..(ci + 1) * layer.c_out]) {
                    *a += v * w.to_f64();
                }
            }
            out.extend(acc.iter().map(|&a| T::from_f64(a)));
        }
        let out = self.push(out, layer.c_out);
        self.ops.push(Op::Linear { layer, x, out });
        out
    }

    fn conv(&mut self, layer: ConvLayer, map: MapRef, x: usize) -> Result<usize> {
        let (kmap, coords) = self.plan.map(map);
        let weights = ConvWeights::new(
            layer.volume,
            layer.c_in,
            layer.c_out,
            self.param(layer.w, layer.volume * layer.c_in * layer.c_out).to_vec(),
        )?;
        let input = SparseTensor::new(coords.clone(), self.nodes[x].data.clone(), layer.c_in, 1)?;
        let cfg = &self.model.cfg;
        let (result, _) = conv(&input, &weights, kmap, cfg.dataflow, cfg.exec)?;
        let mut data = result.into_features();
        let bias = self.param(layer.b, layer.c_out);
        for row in data.chunks_exact_mut(layer.c_out) {
            for (v, b) in row.iter_mut().zip(bias) {
                *v = T::from_f64(v.to_f64() + b.to_f64());
            }
        }
        let out = self.push(data, layer.c_out);
        self.ops.push(Op::Conv { layer, map, x, out });
        Ok(out)
    }

    fn relu(&mut self, x: usize) -> usize {
        let data = self.nodes[x]
            .data
            .iter()
            .map(|&v| if v.to_f64() > 0.0 { v } else { T::default() })
            .collect();
        let out = self.push(data, self.nodes[x].channels);
        self.ops.push(Op::Relu { x, out });
        out
    }

    fn add(&mut self, a: usize, b: usize) -> usize {
        let data = self.nodes[a]
            .data
            .iter()
            .zip(&self.nodes[b].data)
            .map(|(x, y)| T::from_f64(x.to_f64() + y.to_f64()))
            .collect();
        let out = self.push(data, self.nodes[a].channels);
        self.ops.push(Op::Add { a, b, out });
        out
    }

    fn concat(&mut self, a: usize, b: usize) -> usize {
        let (ca, cb) = (self.nodes[a].channels, self.nodes[b].channels);
        let mut data = Vec::with_capacity(self.nodes[a].data.len() + self.nodes[b].data.len());
        for (ra, rb) in self.nodes[a]
            .data
            .chunks_exact(ca)
            .zip(self.nodes[b].data.chunks_exact(cb))
        {
            data.extend_from_slice(ra);
            data.extend_from_slice(rb);
        }
        let out = self.push(data, ca + cb);
        self.ops.push(Op::Concat { a, b, out });
        out
    }

    fn block(&mut self, (c1, c2): (ConvLayer, ConvLayer), level: usize, x: usize) -> Result<usize> {
        let a = self.conv(c1, MapRef::Sub(level), x)?;
        let a = self.relu(a);
        let z = self.conv(c2, MapRef::Sub(level), a)?;
        let s = self.add(z, x);
        Ok(self.relu(s))
    }

    /// Runs the network and returns the node holding voxel logits.
    fn run(&mut self) -> Result<usize> {
        let layout = &self.model.layout;
        let input = self.plan.features.iter().map(|&v| T::from_f64(v)).collect();
        let x = self.push(input, VOXEL_INPUT_FEATURES);
        let h = self.linear(layout.stem, x);
        let mut h = self.relu(h);
        let mut skips = Vec::new();
        for level in 0..self.model.cfg.levels() {
            if level > 0 {
                h = self.conv(layout.down[level - 1], MapRef::Down(level), h)?;
                h = self.relu(h);
            }
            for &b in &layout.blocks[level] {
                h = self.block(b, level, h)?;
            }
            skips.push(h);
        }
        for level in (1..self.model.cfg.levels()).rev() {
            let u = self.conv(layout.up[level - 1], MapRef::Up(level), h)?;
            let u = self.relu(u);
            let c = self.concat(u, skips[level - 1]);
            h = self.linear(layout.fuse[level - 1], c);
            h = self.relu(h);
        }
        Ok(self.linear(layout.head, h))
    }

    /// Parameter gradients given the gradient of `node`.
    fn backward(&self, node: usize, seed: Vec<f64>) -> Result<Vec<f64>> {
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[node] = Some(seed);
        let mut pgrad = vec![0.0; self.model.layout.total];
        let accumulate = |grads: &mut Vec<Option<Vec<f64>>>, id: usize, g: Vec<f64>| match &mut grads[id] {
            Some(existing) => existing.iter_mut().zip(g).for_each(|(e, v)| *e += v),
            slot => *slot = Some(g),
        };
        for op in self.ops.iter().rev() {
            match *op {
                Op::Linear { layer, x, out } => {
                    let Some(g) = grads[out].take() else { continue };
                    let w = self.param(layer.w, layer.c_in * layer.c_out);
                    let input = &self.nodes[x].data;
                    let mut gx = vec![0.0; input.len()];
                    for ((row, grow), gxrow) in input
                        .chunks_exact(layer.c_in)
                        .zip(g.chunks_exact(layer.c_out))
                        .zip(gx.chunks_exact_mut(layer.c_in))
                    {
                        for (o, &gv) in grow.iter().enumerate() {
                            pgrad[layer.b + o] += gv;
                        }
                        for (ci, xv) in row.iter().enumerate() {
                            let xv = xv.to_f64();
                            let wrow = &w[ci * layer.c_out..(ci + 1) * layer.c_out];
                            let prow = &mut pgrad[layer.w + ci * layer.c_out..layer.w + (ci + 1) * layer.c_out];
                            let mut acc = 0.0;
                            for ((p, wv), &gv) in prow.iter_mut().zip(wrow).zip(grow) {
                                *p += xv * gv;
                                acc += wv.to_f64() * gv;
                            }
                            gxrow[ci] = acc;
                        }
                    }
                    accumulate(&mut grads, x, gx);
                }
                Op::Conv { layer, map, x, out } => {
                    let Some(g) = grads[out].take() else { continue };
                    for row in g.chunks_exact(layer.c_out) {
                        for (o, &gv) in row.iter().enumerate() {
                            pgrad[layer.b + o] += gv;
                        }
                    }
                    let weights = ConvWeights::new(
                        layer.volume,
                        layer.c_in,
                        layer.c_out,
                        self.param(layer.w, layer.volume * layer.c_in * layer.c_out).to_vec(),
                    )?;
                    let g_t: Vec<T> = g.iter().map(|&v| T::from_f64(v)).collect();
                    let (gx, gw) = conv_backward_raw(&g_t, &self.nodes[x].data, &weights, self.plan.map(map).0)?;
                    for (p, v) in pgrad[layer.w..layer.w + gw.data().len()].iter_mut().zip(gw.data()) {
                        *p += v.to_f64();
                    }
                    accumulate(&mut grads, x, gx.iter().map(|v| v.to_f64()).collect());
                }
                Op::Relu { x, out } => {
                    let Some(mut g) = grads[out].take() else { continue };
                    for (gv, y) in g.iter_mut().zip(&self.nodes[out].data) {
                        if y.to_f64() <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                    accumulate(&mut grads, x, g);
                }
                Op::Add { a, b, out } => {
                    let Some(g) = grads[out].take() else { continue };
                    accumulate(&mut grads, a, g.clone());
                    accumulate(&mut grads, b, g);
                }
                Op::Concat { a, b, out } => {
                    let Some(g) = grads[out].take() else { continue };
                    let (ca, cb) = (self.nodes[a].channels, self.nodes[b].channels);
                    let mut ga = Vec::with_capacity(g.len() / (ca + cb) * ca);
                    let mut gb = Vec::with_capacity(g.len() / (ca + cb) * cb);
                    for row in g.chunks_exact(ca + cb) {
                        ga.extend_from_slice(&row[..ca]);
                        gb.extend_from_slice(&row[ca..]);
                    }
                    accumulate(&mut grads, a, ga);
                    accumulate(&mut grads, b, gb);
                }
            }
        }
        Ok(pgrad)
    }
}

/// Segmentor parameters stored as one flat vector in declaration order.
#[derive(Debug, Clone)]
pub struct Segmentor<T: Element = f32> {
    cfg: SegmentorConfig,
    layout: Layout,
    params: Vec<T>,
}

impl<T: Element> PartialEq for Segmentor<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cfg == other.cfg && self.params == other.params
    }
}

impl<T: Element> Segmentor<T> {
    /// Seeded uniform initialisation in `+-sqrt(1 / fan_in)`, zero biases.
    pub fn new(cfg: SegmentorConfig) -> Result<Self> {
        let mut model = Self::zeroed(cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(model.cfg.seed);
        for (offset, len, fan_in) in model.layout.fan_in() {
            let bound = (1.0 / fan_in as f64).sqrt();
            for p in &mut model.params[offset..offset + len] {
                *p = T::from_f64(rng.gen_range(-bound..=bound));
            }
        }
        Ok(model)
    }

    pub fn zeroed(cfg: SegmentorConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(&cfg);
        let params = vec![T::default(); layout.total];
        Ok(Self { cfg, layout, params })
    }

    /// Builds a model around an existing parameter vector.
    pub fn from_params(cfg: SegmentorConfig, params: Vec<T>) -> Result<Self> {
        let mut model = Self::zeroed(cfg)?;
        if params.len() != model.params.len() {
            return Err(Error::IncompatibleCheckpoint(format!(
                "{} parameters for a model with {}",
                params.len(),
                model.params.len()
            )));
        }
        model.params = params;
        Ok(model)
    }

    pub fn config(&self) -> &SegmentorConfig {
        &self.cfg
    }

    /// Changes how convolutions execute; results are unaffected up to
    /// summation order.
    pub fn set_execution(&mut self, dataflow: Dataflow, exec: ExecMode) {
        self.cfg.dataflow = dataflow;
        self.cfg.exec = exec;
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn param_entries(&self) -> &[ParamEntry] {
        &self.layout.entries
    }

    pub fn num_classes(&self) -> usize {
        self.cfg.num_classes
    }

    pub fn plan(&self, cloud: &PointCloud) -> Result<Plan> {
        Plan::build(cloud, &self.cfg)
    }

    fn check_plan(&self, plan: &Plan) -> Result<()> {
        if plan.levels.len() != self.cfg.levels() || plan.features.len() != plan.voxel_count() * VOXEL_INPUT_FEATURES {
            return Err(Error::InconsistentMap(
                "plan was built for a different architecture".into(),
            ));
        }
        Ok(())
    }

    /// Logits per voxel, `voxels x classes`.
    pub fn voxel_logits(&self, plan: &Plan) -> Result<Vec<T>> {
        self.check_plan(plan)?;
        if plan.voxel_count() == 0 {
            return Ok(Vec::new());
        }
        let mut tape = Tape::new(self, plan);
        let out = tape.run()?;
        Ok(tape.nodes.swap_remove(out).data)
    }

    /// Logits per point, `points x classes`; dropped points get zeros.
    pub fn forward_plan(&self, plan: &Plan) -> Result<Vec<T>> {
        let logits = self.voxel_logits(plan)?;
        devoxelize_rows(&logits, self.cfg.num_classes, &plan.voxels.map)
    }

    pub fn forward(&self, cloud: &PointCloud) -> Result<Vec<T>> {
        if cloud.is_empty() {
            return Ok(Vec::new());
        }
        self.forward_plan(&self.plan(cloud)?)
    }

    pub fn predict(&self, cloud: &PointCloud) -> Result<Vec<ClassId>> {
        Ok(argmax_labels(&self.forward(cloud)?, self.cfg.num_classes))
    }

    /// Mean cross-entropy over all scored points of the batch and its
    /// gradient with respect to the flat parameter vector. Returns the
    /// number of scored points as well.
    pub fn loss_and_grad(&self, batch: &[(&Plan, &[ClassId])]) -> Result<(f64, Vec<f64>, usize)> {
        let classes = self.cfg.num_classes;
        let mut total = 0.0;
        let mut scored = 0;
        let mut grad = vec![0.0; self.params.len()];
        for &(plan, labels) in batch {
            self.check_plan(plan)?;
            if labels.len() != plan.point_count() {
                return Err(Error::InvalidInput(format!(
                    "{} labels for {} points",
                    labels.len(),
                    plan.point_count()
                )));
            }
            let map = &plan.voxels.map;
            // Dropped points see zero logits: ln(C) each, no gradient.
            let dropped = (0..labels.len())
                .filter(|&p| map.voxel_of(p).is_none() && labels[p] != crate::IGNORE)
                .count();
            total += dropped as f64 * (classes as f64).ln();
            scored += dropped;
            if plan.voxel_count() == 0 {
                continue;
            }
            let mut tape = Tape::new(self, plan);
            let out = tape.run()?;
            let members = (0..plan.voxel_count()).map(|v| map.members(v).iter().map(|&p| labels[p as usize]).collect());
            let (sum, n, g) = voxel_cross_entropy_sum(&tape.nodes[out].data, classes, members)?;
            total += sum;
            scored += n;
            let pg = tape.backward(out, g)?;
            grad.iter_mut().zip(pg).for_each(|(a, b)| *a += b);
        }
        if scored == 0 {
            return Ok((0.0, grad, 0));
        }
        let inv = 1.0 / scored as f64;
        grad.iter_mut().for_each(|g| *g *= inv);
        Ok((total * inv, grad, scored))
    }

    /// Coordinates produced by running level `level`'s downsampling and
    /// upsampling maps back to back.
    pub fn round_trip_coords(&self, plan: &Plan, level: usize) -> Result<Coords> {
        if level == 0 || level >= plan.levels.len() {
            return Err(Error::InvalidInput(format!("no down/up pair at level {level}")));
        }
        let fine = &plan.levels[level - 1];
        let x = SparseTensor::<T>::zeros(fine.clone(), 1, 1)?;
        let volume = plan.down_maps[level - 1].offsets().len();
        let w = ConvWeights::<T>::zeros(volume, 1, 1);
        let (coarse, _) = conv(&x, &w, &plan.down_maps[level - 1], self.cfg.dataflow, self.cfg.exec)?;
        let (back, _) = conv(&coarse, &w, &plan.up_maps[level - 1], self.cfg.dataflow, self.cfg.exec)?;
        Ok(back.coords().clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::VoxelizationConfig;
    use crate::sparse::relative_error;
    use crate::IGNORE;

    pub(crate) fn tiny_cfg(widths: Vec<usize>, depths: Vec<usize>, seed: u64) -> SegmentorConfig {
        SegmentorConfig {
            voxel: VoxelizationConfig::cartesian([-4.0; 3], [8.0; 3], 0.5),
            widths,
            depths,
            num_classes: 3,
            seed,
            ..SegmentorConfig::default()
        }
    }

    fn random_cloud(seed: u64, n: usize, extent: f64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| {
                [
                    rng.gen_range(0.0..extent),
                    rng.gen_range(0.0..extent),
                    rng.gen_range(0.0..extent),
                ]
            })
            .collect();
        let intensity = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let labels = (0..n).map(|_| rng.gen_range(0..3)).collect();
        PointCloud::new(pts, intensity, Some(labels)).unwrap()
    }

    #[test]
    fn layout_names_and_sizes() {
        let m = Segmentor::<f32>::zeroed(tiny_cfg(vec![2, 3], vec![1, 1], 0)).unwrap();
        let names: Vec<&str> = m.param_entries().iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names.first(), Some(&"stem.weight"));
        assert_eq!(names.last(), Some(&"head.bias"));
        assert!(names.contains(&"level1.block0.conv2.weight"));
        let expected = 4 * 2
            + 2
            + 2 * (27 * 2 * 2 + 2)
            + (8 * 2 * 3 + 3)
            + 2 * (27 * 3 * 3 + 3)
            + (8 * 3 * 2 + 2)
            + (4 * 2 + 2)
            + (2 * 3 + 3);
        assert_eq!(m.params().len(), expected);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = Segmentor::<f32>::new(tiny_cfg(vec![4, 8], vec![1, 1], 5)).unwrap();
        let b = Segmentor::<f32>::new(tiny_cfg(vec![4, 8], vec![1, 1], 5)).unwrap();
        let c = Segmentor::<f32>::new(tiny_cfg(vec![4, 8], vec![1, 1], 6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.params(), c.params());
        let head = a.param_entries().iter().find(|e| e.name == "head.weight").unwrap();
        let bound = (1.0f32 / 4.0).sqrt();
        assert!(a.params()[head.offset..head.offset + head.len]
            .iter()
            .all(|v| v.abs() <= bound));
        let bias = a.param_entries().iter().find(|e| e.name == "head.bias").unwrap();
        assert!(a.params()[bias.offset..bias.offset + bias.len]
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn shapes_and_shared_voxels() {
        let m = Segmentor::<f32>::new(tiny_cfg(vec![4, 8], vec![1, 1], 1)).unwrap();
        let cloud = random_cloud(3, 50, 3.0);
        let logits = m.forward(&cloud).unwrap();
        assert_eq!(logits.len(), 50 * 3);
        assert_eq!(m.predict(&cloud).unwrap().len(), 50);

        let pair = PointCloud::new(
            vec![[0.1, 0.1, 0.1], [0.2, 0.3, 0.4], [2.0, 2.0, 2.0]],
            vec![0.2, 0.9, 0.5],
            None,
        )
        .unwrap();
        let l = m.forward(&pair).unwrap();
        assert_eq!(l[0..3], l[3..6]);

        assert!(m.forward(&PointCloud::default()).unwrap().is_empty());
    }

    #[test]
    fn zero_model_gives_zero_logits() {
        let m = Segmentor::<f64>::zeroed(tiny_cfg(vec![4, 8], vec![1, 1], 0)).unwrap();
        assert!(m.forward(&random_cloud(1, 30, 3.0)).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dropped_points_get_zero_logits() {
        let m = Segmentor::<f32>::new(tiny_cfg(vec![4], vec![1], 2)).unwrap();
        let cloud = PointCloud::new(vec![[1.0, 1.0, 1.0], [50.0, 0.0, 0.0]], vec![0.5, 0.5], None).unwrap();
        let l = m.forward(&cloud).unwrap();
        assert_eq!(&l[3..], &[0.0; 3]);
    }

    #[test]
    fn cached_coordinates_survive_round_trip() {
        let m = Segmentor::<f32>::new(tiny_cfg(vec![2, 2, 2], vec![1, 1, 1], 0)).unwrap();
        let plan = m.plan(&random_cloud(9, 200, 6.0)).unwrap();
        for level in 1..3 {
            assert_eq!(m.round_trip_coords(&plan, level).unwrap(), plan.levels[level - 1]);
        }
        assert!(plan.levels[2].len() <= plan.levels[1].len());
    }

    fn randomize(m: &mut Segmentor<f64>, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        m.params_mut().iter_mut().for_each(|p| *p = rng.gen_range(-0.5..0.5));
    }

    pub(crate) fn gradient_check(seed: u64) -> f64 {
        let mut m = Segmentor::<f64>::new(tiny_cfg(vec![3, 4], vec![1, 1], seed)).unwrap();
        randomize(&mut m, seed + 100);
        let cloud = random_cloud(seed, 40, 2.5);
        let plan = m.plan(&cloud).unwrap();
        let labels = cloud.labels().unwrap().to_vec();
        let (_, grad, _) = m.loss_and_grad(&[(&plan, &labels)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 200);
        let picks: Vec<usize> = (0..60).map(|_| rng.gen_range(0..grad.len())).collect();
        let h = 1e-6;
        let mut numeric = Vec::new();
        for &i in &picks {
            let orig = m.params()[i];
            m.params_mut()[i] = orig + h;
            let up = m.loss_and_grad(&[(&plan, &labels)]).unwrap().0;
            m.params_mut()[i] = orig - h;
            let down = m.loss_and_grad(&[(&plan, &labels)]).unwrap().0;
            m.params_mut()[i] = orig;
            numeric.push((up - down) / (2.0 * h));
        }
        let analytic: Vec<f64> = picks.iter().map(|&i| grad[i]).collect();
        relative_error(&analytic, &numeric)
    }

    #[test]
    fn whole_network_gradient_matches_differences() {
        for seed in 0..3 {
            let err = gradient_check(seed);
            assert!(err < 1e-4, "seed {seed}: {err:e}");
        }
    }

    #[test]
    fn integer_voxel_shift_leaves_logits_unchanged() {
        let m = Segmentor::<f64>::new(tiny_cfg(vec![5], vec![2], 4)).unwrap();
        let cloud = random_cloud(11, 60, 3.0);
        let shift = [1.0, -0.5, 1.5];
        let moved: Vec<[f64; 3]> = cloud
            .positions()
            .iter()
            .map(|p| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]])
            .collect();
        let moved = PointCloud::new(moved, cloud.intensity().to_vec(), None).unwrap();
        let a = m.forward(&cloud).unwrap();
        let b = m.forward(&moved).unwrap();
        assert!(relative_error(&b, &a) < 1e-5);
    }

    #[test]
    fn ignore_labels_do_not_move_gradients() {
        let m = Segmentor::<f64>::new(tiny_cfg(vec![3], vec![1], 0)).unwrap();
        let cloud = random_cloud(1, 20, 2.0);
        let plan = m.plan(&cloud).unwrap();
        let (loss, grad, scored) = m.loss_and_grad(&[(&plan, &[IGNORE; 20])]).unwrap();
        assert_eq!((loss, scored), (0.0, 0));
        assert!(grad.iter().all(|&g| g == 0.0));
    }
}
