//! Frame-level datasets built from per-utterance feature sequences.
//!
//! Sequences are stored unspliced; each mini-batch splices its frames on
//! the fly (edge frames replicated), which keeps memory at one copy of the
//! features instead of seventeen.

use ndarray::{s, Array2};

use crate::dsp::SpliceSpec;
use crate::error::{Error, Result};
use crate::nn::{Matrix, ModelInput};

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Classes(Vec<usize>),
    Values(Matrix),
}

impl Targets {
    fn len(&self) -> usize {
        match self {
            Targets::Classes(c) => c.len(),
            Targets::Values(v) => v.nrows(),
        }
    }
}

/// One utterance: acoustic frames, optional TV frames, per-frame targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub acoustic: Matrix,
    pub tv: Option<Matrix>,
    pub targets: Targets,
}

impl Sequence {
    /// Truncates every member to the shortest frame count.
    pub fn reconciled(mut acoustic: Matrix, mut tv: Option<Matrix>, targets: Targets) -> Result<Self> {
        let mut n = acoustic.nrows().min(targets.len());
        if let Some(t) = &tv {
            n = n.min(t.nrows());
        }
        if n == 0 {
            return Err(Error::shape("empty sequence"));
        }
        acoustic = acoustic.slice(s![..n, ..]).to_owned();
        tv = tv.map(|t| t.slice(s![..n, ..]).to_owned());
        let targets = match targets {
            Targets::Classes(mut c) => {
                c.truncate(n);
                Targets::Classes(c)
            }
            Targets::Values(v) => Targets::Values(v.slice(s![..n, ..]).to_owned()),
        };
        Ok(Self {
            acoustic,
            tv,
            targets,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.acoustic.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BatchTargets {
    Classes(Vec<usize>),
    Values(Matrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub input: ModelInput,
    pub targets: BatchTargets,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    seqs: Vec<Sequence>,
    index: Vec<(u32, u32)>,
    splice: SpliceSpec,
    classification: bool,
}

fn splice_rows(seqs: &[&Matrix], frames: &[(u32, u32)], splice: SpliceSpec) -> Matrix {
    let d = seqs[0].ncols();
    let width = splice.width();
    let mut out = Array2::zeros((frames.len(), d * width));
    for (row, &(u, t)) in frames.iter().enumerate() {
        let seq = seqs[u as usize];
        let last = seq.nrows() as isize - 1;
        for k in 0..width {
            let src = (t as isize + k as isize - splice.left as isize).clamp(0, last) as usize;
            out.slice_mut(s![row, k * d..(k + 1) * d]).assign(&seq.row(src));
        }
    }
    out
}

impl Dataset {
    pub fn new(seqs: Vec<Sequence>, splice: SpliceSpec) -> Result<Self> {
        let first = seqs.first().ok_or_else(|| Error::State("dataset has no sequences".into()))?;
        let classification = matches!(first.targets, Targets::Classes(_));
        let dim = first.acoustic.ncols();
        let tv_dim = first.tv.as_ref().map(|t| t.ncols());
        let mut index = Vec::new();
        for (u, seq) in seqs.iter().enumerate() {
            if seq.acoustic.ncols() != dim || seq.tv.as_ref().map(|t| t.ncols()) != tv_dim {
                return Err(Error::shape(format!("sequence {u} has inconsistent widths")));
            }
            if matches!(seq.targets, Targets::Classes(_)) != classification {
                return Err(Error::shape("mixed class and value targets"));
            }
            let n = seq.n_frames();
            if seq.targets.len() != n || seq.tv.as_ref().is_some_and(|t| t.nrows() != n) {
                return Err(Error::shape(format!("sequence {u} has inconsistent frame counts")));
            }
            index.extend((0..n).map(|t| (u as u32, t as u32)));
        }
        Ok(Self {
            seqs,
            index,
            splice,
            classification,
        })
    }

    /// Total frames.
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn is_classification(&self) -> bool {
        self.classification
    }

    pub fn has_tv(&self) -> bool {
        self.seqs[0].tv.is_some()
    }

    pub fn sequences(&self) -> &[Sequence] {
        &self.seqs
    }

    pub fn splice(&self) -> SpliceSpec {
        self.splice
    }

    /// Spliced width of the acoustic input.
    pub fn input_dim(&self) -> usize {
        self.seqs[0].acoustic.ncols() * self.splice.width()
    }

    /// Gathers frames `rows` (positions in the flat frame index).
    pub fn batch(&self, rows: &[usize]) -> Batch {
        let frames: Vec<(u32, u32)> = rows.iter().map(|&r| self.index[r]).collect();
        let acoustic: Vec<&Matrix> = self.seqs.iter().map(|q| &q.acoustic).collect();
        let acoustic = splice_rows(&acoustic, &frames, self.splice);
        let tv = self.has_tv().then(|| {
            let tv: Vec<&Matrix> = self.seqs.iter().map(|q| q.tv.as_ref().expect("checked in new")).collect();
            splice_rows(&tv, &frames, self.splice)
        });
        let targets = if self.classification {
            BatchTargets::Classes(
                frames
                    .iter()
                    .map(|&(u, t)| match &self.seqs[u as usize].targets {
                        Targets::Classes(c) => c[t as usize],
                        Targets::Values(_) => unreachable!(),
                    })
                    .collect(),
            )
        } else {
            let d = match &self.seqs[0].targets {
                Targets::Values(v) => v.ncols(),
                Targets::Classes(_) => unreachable!(),
            };
            let mut v = Array2::zeros((frames.len(), d));
            for (row, &(u, t)) in frames.iter().enumerate() {
                if let Targets::Values(m) = &self.seqs[u as usize].targets {
                    v.row_mut(row).assign(&m.row(t as usize));
                }
            }
            BatchTargets::Values(v)
        };
        Batch {
            input: ModelInput { acoustic, tv },
            targets,
        }
    }

    /// Consecutive chunks of at most `size` frames, in corpus order.
    pub fn chunks(&self, size: usize) -> impl Iterator<Item = Batch> + '_ {
        let size = size.max(1);
        (0..self.len()).step_by(size).map(move |start| {
            let rows: Vec<usize> = (start..(start + size).min(self.len())).collect();
            self.batch(&rows)
        })
    }
}
