use crate::nn::{ops, BatchNorm, BnCache, BnStats, Conv3, ConvCache, Linear, ParamAlloc, WnLinear};
use crate::scalar::Scalar;

use super::arch::ArchConfig;

/// Shared feature extractor `h`: conv blocks, global pool, linear layer and
/// a batch norm over the feature vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Backbone<T> {
    pub(crate) convs: Vec<Conv3>,
    pub(crate) fc: Linear,
    pub(crate) bn: BatchNorm,
    pub(crate) image_size: usize,
    pub params: Vec<T>,
    pub running: BnStats<T>,
}

struct BlockCache<T> {
    conv: ConvCache<T>,
    /// Post-ReLU conv output.
    act: Vec<T>,
    pool_arg: Option<Vec<usize>>,
    side: usize,
}

pub struct BackboneCache<T> {
    blocks: Vec<BlockCache<T>>,
    gap: Vec<T>,
}

/// Per-sample backbone outputs; `pre` is the feature vector before the
/// batch-coupled normalization.
pub struct BackboneOut<T> {
    pub pre: Vec<T>,
    pub tap: Vec<T>,
    pub cache: Option<BackboneCache<T>>,
}

impl<T: Scalar> Backbone<T> {
    pub fn new(arch: &ArchConfig, rng: &mut impl rand::Rng) -> Self {
        let mut alloc = ParamAlloc::default();
        let mut cin = arch.input_channels;
        let mut convs = Vec::with_capacity(arch.channels.len());
        for &c in &arch.channels {
            convs.push(Conv3::new(cin, c, &mut alloc));
            cin = c;
        }
        let fc = Linear::new(cin, arch.feature_dim, &mut alloc);
        let bn = BatchNorm::new(arch.feature_dim, &mut alloc);
        let mut params = vec![T::zero(); alloc.len()];
        for c in &convs {
            c.init(&mut params, rng);
        }
        fc.init(&mut params, rng);
        bn.init(&mut params);
        Self {
            convs,
            fc,
            bn,
            image_size: arch.image_size,
            params,
            running: BnStats::new(arch.feature_dim),
        }
    }

    /// Batch norm over per-sample `pre` features; batch statistics when `train`.
    pub fn normalize(&self, pre: &[Vec<T>], train: bool) -> (Vec<Vec<T>>, BnCache<T>) {
        self.bn.forward(&self.params, &self.running, pre, train)
    }

    pub fn normalize_backward(&self, cache: &BnCache<T>, dz: &[Vec<T>], grads: &mut [T]) -> Vec<Vec<T>> {
        self.bn.backward(&self.params, grads, cache, dz)
    }

    pub fn update_running(&mut self, cache: &BnCache<T>) {
        self.bn.update_running(&mut self.running, cache);
    }

    pub fn feature_dim(&self) -> usize {
        self.fc.fout
    }

    /// `input` is channel-major. The tap is the activation of the penultimate
    /// block, before its pooling.
    pub fn forward(&self, input: &[T], keep_cache: bool) -> BackboneOut<T> {
        let n = self.convs.len();
        let mut side = self.image_size;
        let mut x = input.to_vec();
        let mut blocks = Vec::with_capacity(n);
        let mut tap = Vec::new();
        for (i, conv) in self.convs.iter().enumerate() {
            let (mut act, cache) = conv.forward(&self.params, &x, side, side);
            ops::relu_in_place(&mut act);
            if i + 2 == n {
                tap = act.clone();
            }
            if i + 1 < n {
                let (pooled, arg) = ops::maxpool2(&act, conv.cout, side, side);
                blocks.push(BlockCache {
                    conv: cache,
                    act,
                    pool_arg: Some(arg),
                    side,
                });
                side /= 2;
                x = pooled;
            } else {
                x = ops::global_avg_pool(&act, conv.cout, side * side);
                blocks.push(BlockCache {
                    conv: cache,
                    act,
                    pool_arg: None,
                    side,
                });
            }
        }
        let pre = self.fc.forward(&self.params, &x);
        let cache = keep_cache.then(|| BackboneCache { blocks, gap: x });
        BackboneOut { pre, tap, cache }
    }

    /// Backpropagates `dpre` (gradient at the pre-norm features) and/or `dtap`
    /// (gradient arriving at the tapped map) into `grads`.
    pub fn backward(&self, cache: &BackboneCache<T>, dpre: Option<&[T]>, dtap: Option<&[T]>, grads: &mut [T]) {
        let n = self.convs.len();
        // Gradient w.r.t. the input of the block being visited.
        let mut carry: Option<Vec<T>> = None;
        if let Some(dpre) = dpre {
            let dgap = self.fc.backward(&self.params, grads, &cache.gap, dpre);
            let last = &cache.blocks[n - 1];
            let mut dact = ops::global_avg_pool_backward(&dgap, last.side * last.side);
            ops::relu_backward_in_place(&mut dact, &last.act);
            carry = self.convs[n - 1].backward(&self.params, grads, &last.conv, &dact, last.side, last.side, true);
        }
        for i in (0..n - 1).rev() {
            let block = &cache.blocks[i];
            let mut dact = carry
                .take()
                .map(|g| ops::maxpool2_backward(&g, block.pool_arg.as_ref().unwrap(), block.act.len()));
            if i + 2 == n {
                if let Some(dtap) = dtap {
                    match dact.as_mut() {
                        Some(d) => d.iter_mut().zip(dtap).for_each(|(a, &b)| *a += b),
                        None => dact = Some(dtap.to_vec()),
                    }
                }
            }
            let Some(mut dact) = dact else { return };
            ops::relu_backward_in_place(&mut dact, &block.act);
            carry = self.convs[i].backward(&self.params, grads, &block.conv, &dact, block.side, block.side, i > 0);
        }
    }
}

/// Goal classifier `f_g`: linear bottleneck, batch norm, weight-normalized output.
#[derive(Clone, Debug, PartialEq)]
pub struct GoalHead<T> {
    pub(crate) fc: Linear,
    pub(crate) bn: BatchNorm,
    pub(crate) cls: WnLinear,
    pub params: Vec<T>,
    pub running: BnStats<T>,
}

pub struct GoalCache<T> {
    z: Vec<Vec<T>>,
    bn: BnCache<T>,
    bn_out: Vec<Vec<T>>,
}

impl<T: Scalar> GoalHead<T> {
    pub fn new(arch: &ArchConfig, classes: usize, rng: &mut impl rand::Rng) -> Self {
        let mut alloc = ParamAlloc::default();
        let fc = Linear::new(arch.feature_dim, arch.bottleneck, &mut alloc);
        let bn = BatchNorm::new(arch.bottleneck, &mut alloc);
        let cls = WnLinear::new(arch.bottleneck, classes, &mut alloc);
        let mut params = vec![T::zero(); alloc.len()];
        fc.init(&mut params, rng);
        bn.init(&mut params);
        cls.init(&mut params, rng);
        Self {
            fc,
            bn,
            cls,
            params,
            running: BnStats::new(arch.bottleneck),
        }
    }

    pub fn classes(&self) -> usize {
        self.cls.fout
    }

    pub fn forward(&self, z: &[Vec<T>], train: bool) -> (Vec<Vec<T>>, GoalCache<T>) {
        let pre_bn: Vec<Vec<T>> = z.iter().map(|r| self.fc.forward(&self.params, r)).collect();
        let (bn_out, bn) = self.bn.forward(&self.params, &self.running, &pre_bn, train);
        let logits = bn_out.iter().map(|r| self.cls.forward(&self.params, r)).collect();
        (
            logits,
            GoalCache {
                z: z.to_vec(),
                bn,
                bn_out,
            },
        )
    }

    pub fn update_running(&mut self, cache: &GoalCache<T>) {
        self.bn.update_running(&mut self.running, &cache.bn);
    }

    /// Returns the gradient w.r.t. the input features.
    pub fn backward(&self, cache: &GoalCache<T>, dlogits: &[Vec<T>], grads: &mut [T]) -> Vec<Vec<T>> {
        let dbn: Vec<Vec<T>> = dlogits
            .iter()
            .zip(&cache.bn_out)
            .map(|(d, x)| self.cls.backward(&self.params, grads, x, d))
            .collect();
        let dpre = self.bn.backward(&self.params, grads, &cache.bn, &dbn);
        dpre.iter()
            .zip(&cache.z)
            .map(|(d, x)| self.fc.backward(&self.params, grads, x, d))
            .collect()
    }
}

/// Subsidiary classifier `f_n` on the tapped map: conv-ReLU-maxpool block,
/// flatten, linear ReLU, weight-normalized output with `|C_n| + 1` logits.
/// The map is flattened rather than globally pooled so sticker position
/// survives.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsidiaryHead<T> {
    pub(crate) conv: Conv3,
    pub(crate) fc: Linear,
    pub(crate) cls: WnLinear,
    pub(crate) side: usize,
    pub params: Vec<T>,
}

pub struct SubsidiaryCache<T> {
    conv: ConvCache<T>,
    act: Vec<T>,
    pool_arg: Vec<usize>,
    pooled: Vec<T>,
    hidden: Vec<T>,
}

impl<T: Scalar> SubsidiaryHead<T> {
    pub fn new(arch: &ArchConfig, sticker_classes: usize, rng: &mut impl rand::Rng) -> Self {
        let mut alloc = ParamAlloc::default();
        let conv = Conv3::new(arch.tap_channels(), arch.subsidiary_channels, &mut alloc);
        let pooled = arch.tap_side() / 2;
        let fc = Linear::new(arch.subsidiary_channels * pooled * pooled, arch.bottleneck, &mut alloc);
        let cls = WnLinear::new(arch.bottleneck, sticker_classes + 1, &mut alloc);
        let mut params = vec![T::zero(); alloc.len()];
        conv.init(&mut params, rng);
        fc.init(&mut params, rng);
        cls.init(&mut params, rng);
        Self {
            conv,
            fc,
            cls,
            side: arch.tap_side(),
            params,
        }
    }

    pub fn outputs(&self) -> usize {
        self.cls.fout
    }

    pub fn forward(&self, tap: &[T]) -> (Vec<T>, SubsidiaryCache<T>) {
        let (mut act, conv) = self.conv.forward(&self.params, tap, self.side, self.side);
        ops::relu_in_place(&mut act);
        let (pooled, pool_arg) = ops::maxpool2(&act, self.conv.cout, self.side, self.side);
        let mut hidden = self.fc.forward(&self.params, &pooled);
        ops::relu_in_place(&mut hidden);
        let logits = self.cls.forward(&self.params, &hidden);
        (
            logits,
            SubsidiaryCache {
                conv,
                act,
                pool_arg,
                pooled,
                hidden,
            },
        )
    }

    pub fn backward(&self, cache: &SubsidiaryCache<T>, dlogits: &[T], grads: &mut [T], need_tap_grad: bool) -> Option<Vec<T>> {
        let mut dh = self.cls.backward(&self.params, grads, &cache.hidden, dlogits);
        ops::relu_backward_in_place(&mut dh, &cache.hidden);
        let dpooled = self.fc.backward(&self.params, grads, &cache.pooled, &dh);
        let mut dact = ops::maxpool2_backward(&dpooled, &cache.pool_arg, cache.act.len());
        ops::relu_backward_in_place(&mut dact, &cache.act);
        self.conv
            .backward(&self.params, grads, &cache.conv, &dact, self.side, self.side, need_tap_grad)
    }
}
