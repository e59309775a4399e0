use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::layers::{self, Conv};
use super::tensor::Tensor;
use crate::rng;
use crate::transform::{Shape, NUM_TRANSFORMS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backbone {
    /// Two conv(3×3)+ReLU+maxpool blocks and global average pooling.
    Tiny,
    /// Two full-resolution conv(3×3)+ReLU layers with a 1×1 per-pixel head.
    TinySeg,
    Densenet121,
    Densenet169,
    FpnDensenet121,
}

impl Backbone {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tiny" | "tiny-cnn" => Ok(Backbone::Tiny),
            "tiny-seg" => Ok(Backbone::TinySeg),
            "densenet121" | "densenet-121" => Ok(Backbone::Densenet121),
            "densenet169" | "densenet-169" => Ok(Backbone::Densenet169),
            "fpn-densenet121" => Ok(Backbone::FpnDensenet121),
            other => Err(Error::InvalidArgument(format!("unknown model `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Backbone::Tiny => "tiny",
            Backbone::TinySeg => "tiny-seg",
            Backbone::Densenet121 => "densenet121",
            Backbone::Densenet169 => "densenet169",
            Backbone::FpnDensenet121 => "fpn-densenet121",
        }
    }

    pub fn task(&self) -> TaskKind {
        match self {
            Backbone::TinySeg | Backbone::FpnDensenet121 => TaskKind::Segmentation,
            _ => TaskKind::Classification,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classification,
    Segmentation,
}

/// Channel widths of the two convolutional stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Widths {
    pub first: usize,
    pub second: usize,
}

impl Default for Widths {
    fn default() -> Self {
        Self { first: 8, second: 16 }
    }
}

/// Task head output.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskLogits {
    /// `n×classes`, row-major.
    Classes(Vec<f64>),
    /// `n×classes×h×w`.
    Map(Tensor),
}

impl TaskLogits {
    pub fn as_slice(&self) -> &[f64] {
        match self {
            TaskLogits::Classes(v) => v,
            TaskLogits::Map(t) => &t.data,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    /// `n×15` augmentation logits.
    pub aug: Vec<f64>,
    pub task: TaskLogits,
}

/// Parameter block names and lengths, in storage order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub blocks: Vec<(String, usize)>,
}

impl ParamLayout {
    pub fn total(&self) -> usize {
        self.blocks.iter().map(|(_, n)| n).sum()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.blocks
            .iter()
            .map(|(_, n)| {
                let o = off;
                off += n;
                o
            })
            .collect()
    }
}

/// A shared backbone with an augmentation head (15 logits) and a task head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHandle {
    pub backbone: Backbone,
    pub input: Shape,
    pub classes: usize,
    pub widths: Widths,
    pub params: Vec<f64>,
}

struct Views<'a> {
    c1w: &'a [f64],
    c1b: &'a [f64],
    c2w: &'a [f64],
    c2b: &'a [f64],
    aw: &'a [f64],
    ab: &'a [f64],
    tw: &'a [f64],
    tb: &'a [f64],
}

struct Cache {
    x: Tensor,
    a1: Tensor,
    p1_in: Tensor,
    arg1: Vec<usize>,
    p1: Tensor,
    a2: Tensor,
    r2_shape: [usize; 4],
    arg2: Vec<usize>,
    feat_map: Tensor,
    g: Vec<f64>,
}

impl ModelHandle {
    pub fn new(backbone: Backbone, input: Shape, classes: usize, seed: u64) -> Result<Self> {
        Self::with_widths(backbone, input, classes, Widths::default(), seed)
    }

    pub fn with_widths(backbone: Backbone, input: Shape, classes: usize, widths: Widths, seed: u64) -> Result<Self> {
        match backbone {
            Backbone::Tiny | Backbone::TinySeg => {}
            other => return Err(Error::UnsupportedBackbone(other.name().into())),
        }
        if classes < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 classes, got {classes}")));
        }
        if backbone == Backbone::Tiny && (input.height < 4 || input.width < 4) {
            return Err(Error::InvalidArgument(format!("tiny backbone needs inputs of at least 4x4, got {input}")));
        }
        let mut model = Self {
            backbone,
            input,
            classes,
            widths,
            params: Vec::new(),
        };
        let layout = model.layout();
        let mut r = rng::derive(seed, &[rng::tag("init")]);
        let mut params = Vec::with_capacity(layout.total());
        let fan_ins = model.fan_ins();
        for ((name, len), fan_in) in layout.blocks.iter().zip(fan_ins) {
            if name.ends_with(".weight") {
                let std = (2.0 / fan_in as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("finite std");
                params.extend((0..*len).map(|_| normal.sample(&mut r)));
            } else {
                params.extend(std::iter::repeat_n(0.0, *len));
            }
        }
        model.params = params;
        Ok(model)
    }

    pub fn task(&self) -> TaskKind {
        self.backbone.task()
    }

    fn convs(&self) -> (Conv, Conv) {
        let c = self.input.channels;
        (
            Conv {
                in_c: c,
                out_c: self.widths.first,
                k: 3,
            },
            Conv {
                in_c: self.widths.first,
                out_c: self.widths.second,
                k: 3,
            },
        )
    }

    pub fn layout(&self) -> ParamLayout {
        let (c1, c2) = self.convs();
        let f = self.widths.second;
        let k = self.classes;
        let task = match self.backbone {
            Backbone::TinySeg => "seg",
            _ => "task",
        };
        ParamLayout {
            blocks: vec![
                ("conv1.weight".into(), c1.weight_len()),
                ("conv1.bias".into(), c1.out_c),
                ("conv2.weight".into(), c2.weight_len()),
                ("conv2.bias".into(), c2.out_c),
                ("aug_head.weight".into(), NUM_TRANSFORMS * f),
                ("aug_head.bias".into(), NUM_TRANSFORMS),
                (format!("{task}_head.weight"), k * f),
                (format!("{task}_head.bias"), k),
            ],
        }
    }

    fn fan_ins(&self) -> Vec<usize> {
        let (c1, c2) = self.convs();
        let f = self.widths.second;
        vec![c1.in_c * 9, 1, c2.in_c * 9, 1, f, 1, f, 1]
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Mutable view of one parameter block by name, e.g. `aug_head.bias`.
    pub fn block_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let layout = self.layout();
        let offsets = layout.offsets();
        let i = layout.blocks.iter().position(|(n, _)| n == name)?;
        let len = layout.blocks[i].1;
        Some(&mut self.params[offsets[i]..offsets[i] + len])
    }

    fn views<'a>(&self, p: &'a [f64]) -> Views<'a> {
        let layout = self.layout();
        let mut rest = p;
        let mut take = |n: usize| {
            let (a, b) = rest.split_at(n);
            rest = b;
            a
        };
        let lens: Vec<usize> = layout.blocks.iter().map(|(_, n)| *n).collect();
        Views {
            c1w: take(lens[0]),
            c1b: take(lens[1]),
            c2w: take(lens[2]),
            c2b: take(lens[3]),
            aw: take(lens[4]),
            ab: take(lens[5]),
            tw: take(lens[6]),
            tb: take(lens[7]),
        }
    }

    pub fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.n == 0 || x.c != self.input.channels || x.h != self.input.height || x.w != self.input.width {
            return Err(Error::ShapeMismatch(format!(
                "model expects (n,{},{},{}), got {:?}",
                self.input.channels,
                self.input.height,
                self.input.width,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Both heads from one backbone pass. Deterministic: there is no dropout
    /// or batch statistics, so train and eval modes coincide.
    pub fn forward(&self, x: &Tensor) -> Result<Outputs> {
        self.check_input(x)?;
        Ok(self.forward_cached(x).0)
    }

    fn forward_cached(&self, x: &Tensor) -> (Outputs, Cache) {
        let v = self.views(&self.params);
        let (conv1, conv2) = self.convs();
        let f = self.widths.second;
        let n = x.n;
        let a1 = conv1.forward(x, v.c1w, v.c1b);
        let r1 = layers::relu(&a1);
        let (p1, arg1, p1_in) = match self.backbone {
            Backbone::Tiny => {
                let (p, arg) = layers::maxpool2(&r1);
                (p, arg, r1)
            }
            _ => (r1.clone(), Vec::new(), r1),
        };
        let a2 = conv2.forward(&p1, v.c2w, v.c2b);
        let r2 = layers::relu(&a2);
        let r2_shape = r2.shape();
        let (feat_map, arg2) = match self.backbone {
            Backbone::Tiny => layers::maxpool2(&r2),
            _ => (r2, Vec::new()),
        };
        let g = layers::gap(&feat_map);
        let aug = layers::linear(&g, n, f, v.aw, v.ab);
        let task = match self.backbone {
            Backbone::Tiny => TaskLogits::Classes(layers::linear(&g, n, f, v.tw, v.tb)),
            _ => {
                let head = Conv {
                    in_c: f,
                    out_c: self.classes,
                    k: 1,
                };
                TaskLogits::Map(head.forward(&feat_map, v.tw, v.tb))
            }
        };
        let cache = Cache {
            x: x.clone(),
            a1,
            p1_in,
            arg1,
            p1,
            a2,
            r2_shape,
            arg2,
            feat_map,
            g,
        };
        (Outputs { aug, task }, cache)
    }

    /// Runs the network, lets `loss` turn the outputs into gradients with
    /// respect to both logit sets, and back-propagates them.
    pub(crate) fn forward_backward<T>(
        &self,
        x: &Tensor,
        loss: impl FnOnce(&Outputs) -> Result<(T, Vec<f64>, Vec<f64>)>,
    ) -> Result<(T, Vec<f64>)> {
        self.check_input(x)?;
        let (out, cache) = self.forward_cached(x);
        let (value, d_aug, d_task) = loss(&out)?;
        Ok((value, self.backward(&cache, &d_aug, &d_task)))
    }

    fn backward(&self, cache: &Cache, d_aug: &[f64], d_task: &[f64]) -> Vec<f64> {
        let v = self.views(&self.params);
        let layout = self.layout();
        let offsets = layout.offsets();
        let mut grads = vec![0.0; self.params.len()];
        let (conv1, conv2) = self.convs();
        let f = self.widths.second;
        let n = cache.x.n;

        let (g_c1w, rest) = grads.split_at_mut(offsets[1]);
        let (g_c1b, rest) = rest.split_at_mut(offsets[2] - offsets[1]);
        let (g_c2w, rest) = rest.split_at_mut(offsets[3] - offsets[2]);
        let (g_c2b, rest) = rest.split_at_mut(offsets[4] - offsets[3]);
        let (g_aw, rest) = rest.split_at_mut(offsets[5] - offsets[4]);
        let (g_ab, rest) = rest.split_at_mut(offsets[6] - offsets[5]);
        let (g_tw, g_tb) = rest.split_at_mut(offsets[7] - offsets[6]);

        let mut dg = vec![0.0; n * f];
        layers::linear_backward(&cache.g, n, f, v.aw, d_aug, g_aw, g_ab, &mut dg);
        let mut d_feat = match self.backbone {
            Backbone::Tiny => {
                layers::linear_backward(&cache.g, n, f, v.tw, d_task, g_tw, g_tb, &mut dg);
                layers::gap_backward(cache.feat_map.shape(), &dg)
            }
            _ => {
                let head = Conv {
                    in_c: f,
                    out_c: self.classes,
                    k: 1,
                };
                let fm = &cache.feat_map;
                let d_map = Tensor {
                    n,
                    c: self.classes,
                    h: fm.h,
                    w: fm.w,
                    data: d_task.to_vec(),
                };
                let mut d = head
                    .backward(fm, v.tw, &d_map, g_tw, g_tb, true)
                    .expect("input gradient requested");
                let from_gap = layers::gap_backward(fm.shape(), &dg);
                for (a, b) in d.data.iter_mut().zip(&from_gap.data) {
                    *a += b;
                }
                d
            }
        };
        let mut d_r2 = match self.backbone {
            Backbone::Tiny => layers::maxpool2_backward(cache.r2_shape, &cache.arg2, &d_feat),
            _ => std::mem::replace(&mut d_feat, Tensor::zeros(0, 0, 0, 0)),
        };
        layers::relu_backward(&cache.a2, &mut d_r2);
        let d_p1 = conv2
            .backward(&cache.p1, v.c2w, &d_r2, g_c2w, g_c2b, true)
            .expect("input gradient requested");
        let mut d_r1 = match self.backbone {
            Backbone::Tiny => layers::maxpool2_backward(cache.p1_in.shape(), &cache.arg1, &d_p1),
            _ => d_p1,
        };
        layers::relu_backward(&cache.a1, &mut d_r1);
        conv1.backward(&cache.x, v.c1w, &d_r1, g_c1w, g_c1b, false);
        grads
    }
}
