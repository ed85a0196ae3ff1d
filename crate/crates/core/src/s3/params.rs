use std::fmt::Write;

use crate::s3::{seeded_uniform, S3Config, S3Error, Tensor};

/// Initialization range for seeded parameters.
pub const INIT_SCALE: f64 = 0.1;

/// `K×C` learnable query embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySet(pub Tensor);

impl QuerySet {
    pub fn new(tensor: Tensor) -> Result<Self, S3Error> {
        tensor.dims()?;
        Ok(Self(tensor))
    }

    pub fn len(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Query, key and value maps, each `C×C`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w_q: Tensor,
    pub w_k: Tensor,
    pub w_v: Tensor,
}

impl AttentionParams {
    pub fn channels(&self) -> usize {
        self.w_q.shape()[0]
    }

    pub fn validate(&self) -> Result<(), S3Error> {
        let c = self.channels();
        for (name, w) in [("w_q", &self.w_q), ("w_k", &self.w_k), ("w_v", &self.w_v)] {
            if w.shape() != [c, c] {
                return Err(S3Error::ShapeMismatch(format!(
                    "{name} must be {c}×{c}, got {:?}",
                    w.shape()
                )));
            }
            w.ensure_finite(name)?;
        }
        Ok(())
    }
}

/// Affine map `x·weight + bias` from `C` to `D` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl ProjectorParams {
    pub fn validate(&self) -> Result<(), S3Error> {
        let (_, d) = self.weight.dims()?;
        if self.bias.shape() != [d] {
            return Err(S3Error::ShapeMismatch(format!(
                "bias must have {d} values, got {:?}",
                self.bias.shape()
            )));
        }
        Ok(())
    }
}

/// All learnable parameters. The two projectors own separate storage.
#[derive(Debug, Clone, PartialEq)]
pub struct S3Params {
    pub queries: QuerySet,
    pub attention: AttentionParams,
    pub proj_v: ProjectorParams,
    pub proj_t: ProjectorParams,
}

pub(crate) const PARAM_NAMES: [&str; 8] = [
    "queries",
    "w_q",
    "w_k",
    "w_v",
    "proj_v.weight",
    "proj_v.bias",
    "proj_t.weight",
    "proj_t.bias",
];

const MAGIC: &[u8; 4] = b"S3P1";

impl S3Params {
    /// Seeded uniform initialization in `[-0.1, 0.1]`.
    pub fn init(cfg: &S3Config, seed: u64) -> Result<Self, S3Error> {
        cfg.validate()?;
        let (k, c, d) = (cfg.k, cfg.c, cfg.d);
        let mut part = 0u64;
        let mut next = |shape: &[usize]| {
            part += 1;
            let n = shape.iter().product();
            Tensor::new(shape.to_vec(), seeded_uniform(n, INIT_SCALE, seed ^ (part << 32)))
                .expect("consistent shape")
        };
        Ok(Self {
            queries: QuerySet(next(&[k, c])),
            attention: AttentionParams {
                w_q: next(&[c, c]),
                w_k: next(&[c, c]),
                w_v: next(&[c, c]),
            },
            proj_v: ProjectorParams {
                weight: next(&[c, d]),
                bias: next(&[d]),
            },
            proj_t: ProjectorParams {
                weight: next(&[c, d]),
                bias: next(&[d]),
            },
        })
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        let z = |t: &Tensor| Tensor::zeros(t.shape());
        Self {
            queries: QuerySet(z(&self.queries.0)),
            attention: AttentionParams {
                w_q: z(&self.attention.w_q),
                w_k: z(&self.attention.w_k),
                w_v: z(&self.attention.w_v),
            },
            proj_v: ProjectorParams {
                weight: z(&self.proj_v.weight),
                bias: z(&self.proj_v.bias),
            },
            proj_t: ProjectorParams {
                weight: z(&self.proj_t.weight),
                bias: z(&self.proj_t.bias),
            },
        }
    }

    pub fn validate(&self) -> Result<(), S3Error> {
        self.attention.validate()?;
        self.proj_v.validate()?;
        self.proj_t.validate()?;
        let c = self.attention.channels();
        let (_, qc) = self.queries.0.dims()?;
        let (vc, vd) = self.proj_v.weight.dims()?;
        let (tc, td) = self.proj_t.weight.dims()?;
        if qc != c || vc != c || tc != c || vd != td {
            return Err(S3Error::ShapeMismatch(format!(
                "inconsistent widths: queries {qc}, attention {c}, projectors {vc}→{vd} / {tc}→{td}"
            )));
        }
        for (name, t) in self.named() {
            t.ensure_finite(name)?;
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, &Tensor); 8] {
        [
            (PARAM_NAMES[0], &self.queries.0),
            (PARAM_NAMES[1], &self.attention.w_q),
            (PARAM_NAMES[2], &self.attention.w_k),
            (PARAM_NAMES[3], &self.attention.w_v),
            (PARAM_NAMES[4], &self.proj_v.weight),
            (PARAM_NAMES[5], &self.proj_v.bias),
            (PARAM_NAMES[6], &self.proj_t.weight),
            (PARAM_NAMES[7], &self.proj_t.bias),
        ]
    }

    pub fn named_mut(&mut self) -> [(&'static str, &mut Tensor); 8] {
        [
            (PARAM_NAMES[0], &mut self.queries.0),
            (PARAM_NAMES[1], &mut self.attention.w_q),
            (PARAM_NAMES[2], &mut self.attention.w_k),
            (PARAM_NAMES[3], &mut self.attention.w_v),
            (PARAM_NAMES[4], &mut self.proj_v.weight),
            (PARAM_NAMES[5], &mut self.proj_v.bias),
            (PARAM_NAMES[6], &mut self.proj_t.weight),
            (PARAM_NAMES[7], &mut self.proj_t.bias),
        ]
    }

    /// Binary container: magic `S3P1`, a `u32` array count, then per array
    /// its name (`u32` length + UTF-8), rank (`u32`), dims (`u64` each) and
    /// values (`f64`), all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(PARAM_NAMES.len() as u32).to_le_bytes());
        for (name, t) in self.named() {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, S3Error> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(S3Error::Format("bad magic".into()));
        }
        let count = r.u32()? as usize;
        if count != PARAM_NAMES.len() {
            return Err(S3Error::Format(format!("expected {} arrays, found {count}", PARAM_NAMES.len())));
        }
        let mut tensors = Vec::with_capacity(count);
        for expected in PARAM_NAMES {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?).map_err(|_| S3Error::Format("name is not UTF-8".into()))?;
            if name != expected {
                return Err(S3Error::Format(format!("expected array {expected:?}, found {name:?}")));
            }
            let rank = r.u32()? as usize;
            if rank == 0 || rank > 4 {
                return Err(S3Error::Format(format!("{name}: unsupported rank {rank}")));
            }
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|&n| n.checked_mul(8).is_some_and(|b| b <= r.remaining()))
                .ok_or_else(|| S3Error::Format(format!("{name}: shape {shape:?} exceeds file size")))?;
            let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
            tensors.push(Tensor::new(shape, data)?);
        }
        if r.remaining() != 0 {
            return Err(S3Error::Format("trailing bytes".into()));
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().expect("eight arrays");
        let params = Self {
            queries: QuerySet(next()),
            attention: AttentionParams {
                w_q: next(),
                w_k: next(),
                w_v: next(),
            },
            proj_v: ProjectorParams {
                weight: next(),
                bias: next(),
            },
            proj_t: ProjectorParams {
                weight: next(),
                bias: next(),
            },
        };
        params.validate()?;
        Ok(params)
    }

    /// Human-readable dump, one array per block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, t) in self.named() {
            let _ = writeln!(out, "{name} {:?}", t.shape());
            let cols = *t.shape().last().expect("non-empty shape");
            for row in t.data().chunks(cols) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:+.6e}")).collect();
                let _ = writeln!(out, "  {}", cells.join(" "));
            }
        }
        out
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], S3Error> {
        if n > self.remaining() {
            return Err(S3Error::Format("unexpected end of data".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, S3Error> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, S3Error> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, S3Error> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
