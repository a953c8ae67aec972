use std::fmt::Write as _;

use super::{sigmoid, BinMapper, GbdtError, Node, Tree, PROB_EPS};
use crate::features::FeatureMatrix;

/// Fitted booster: `p = sigmoid(base_score + learning_rate * sum(tree scores))`.
#[derive(Clone, Debug, PartialEq)]
pub struct GbdtModel {
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    pub bin_mapper: BinMapper,
}

impl GbdtModel {
    pub fn n_features(&self) -> usize {
        self.bin_mapper.n_features()
    }

    /// Raw additive score of one row.
    pub fn raw_score(&self, row: &[f64]) -> f64 {
        let sum: f64 = self
            .trees
            .iter()
            .map(|t| t.score(|f| self.bin_mapper.bin(f, row[f])))
            .sum();
        self.base_score + self.learning_rate * sum
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.raw_score(row)).clamp(PROB_EPS, 1.0 - PROB_EPS)
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>, GbdtError> {
        if x.width() != self.n_features() {
            return Err(GbdtError::DimMismatch {
                expected: self.n_features(),
                found: x.width(),
            });
        }
        Ok((0..x.n_rows())
            .map(|i| self.predict_row(x.row(i)))
            .collect())
    }

    /// Text dump that [`GbdtModel::from_text`] reads back exactly.
    ///
    /// ```text
    /// format=abuse-gbdt/1
    /// num_features=<d>
    /// base_score=<f64>
    /// learning_rate=<f64>
    /// edges.<f>=<e0> <e1> ...        one line per feature
    /// num_trees=<t>
    /// tree.<i>.nodes=<m>
    /// <j> split <feature> <threshold_bin> <left> <right>
    /// <j> leaf <value>
    /// ```
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "format=abuse-gbdt/1").unwrap();
        writeln!(s, "num_features={}", self.n_features()).unwrap();
        writeln!(s, "base_score={:?}", self.base_score).unwrap();
        writeln!(s, "learning_rate={:?}", self.learning_rate).unwrap();
        for f in 0..self.n_features() {
            let edges: Vec<String> = self
                .bin_mapper
                .edges(f)
                .iter()
                .map(|e| format!("{e:?}"))
                .collect();
            writeln!(s, "edges.{f}={}", edges.join(" ")).unwrap();
        }
        writeln!(s, "num_trees={}", self.trees.len()).unwrap();
        for (i, t) in self.trees.iter().enumerate() {
            writeln!(s, "tree.{i}.nodes={}", t.nodes.len()).unwrap();
            for (j, n) in t.nodes.iter().enumerate() {
                match n {
                    Node::Split {
                        feature,
                        threshold_bin,
                        left,
                        right,
                    } => writeln!(s, "{j} split {feature} {threshold_bin} {left} {right}").unwrap(),
                    Node::Leaf { value } => writeln!(s, "{j} leaf {value:?}").unwrap(),
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, GbdtError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = || {
            lines.next().ok_or(GbdtError::Parse {
                line: 0,
                reason: "unexpected end of input".into(),
            })
        };
        fn err(line: usize, reason: impl Into<String>) -> GbdtError {
            GbdtError::Parse {
                line,
                reason: reason.into(),
            }
        }
        fn value<'a>(line: (usize, &'a str), key: &str) -> Result<&'a str, GbdtError> {
            line.1
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .ok_or_else(|| err(line.0, format!("expected key {key:?}")))
        }
        fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, GbdtError> {
            s.trim()
                .parse()
                .map_err(|_| err(line, format!("bad number {s:?}")))
        }

        let l = next()?;
        if value(l, "format")? != "abuse-gbdt/1" {
            return Err(err(l.0, "unsupported format"));
        }
        let l = next()?;
        let d: usize = num(l.0, value(l, "num_features")?)?;
        let l = next()?;
        let base_score: f64 = num(l.0, value(l, "base_score")?)?;
        let l = next()?;
        let learning_rate: f64 = num(l.0, value(l, "learning_rate")?)?;
        let mut edges = Vec::with_capacity(d);
        for f in 0..d {
            let l = next()?;
            let v = value(l, &format!("edges.{f}"))?;
            edges.push(
                v.split_whitespace()
                    .map(|e| num(l.0, e))
                    .collect::<Result<Vec<f64>, _>>()?,
            );
        }
        let bin_mapper = BinMapper::from_edges(edges)?;
        let l = next()?;
        let t: usize = num(l.0, value(l, "num_trees")?)?;
        let mut trees = Vec::with_capacity(t);
        for i in 0..t {
            let l = next()?;
            let m: usize = num(l.0, value(l, &format!("tree.{i}.nodes"))?)?;
            let mut nodes = Vec::with_capacity(m);
            for j in 0..m {
                let (ln, body) = next()?;
                let parts: Vec<&str> = body.split_whitespace().collect();
                if parts.first().map(|p| num::<usize>(ln, p)).transpose()? != Some(j) {
                    return Err(err(ln, format!("expected node {j}")));
                }
                let node = match parts.get(1..) {
                    Some(["split", f, b, left, right]) => {
                        let feature: usize = num(ln, f)?;
                        if feature >= d {
                            return Err(err(ln, "split feature out of range"));
                        }
                        Node::Split {
                            feature,
                            threshold_bin: num(ln, b)?,
                            left: num(ln, left)?,
                            right: num(ln, right)?,
                        }
                    }
                    Some(["leaf", v]) => Node::Leaf { value: num(ln, v)? },
                    _ => return Err(err(ln, "malformed node")),
                };
                nodes.push(node);
            }
            let tree = Tree { nodes };
            if !tree.is_well_formed() {
                return Err(err(l.0, format!("tree {i} is malformed")));
            }
            trees.push(tree);
        }
        Ok(GbdtModel {
            base_score,
            learning_rate,
            trees,
            bin_mapper,
        })
    }
}

/// Probability of the positive class for every row of `x`.
pub fn predict_proba(model: &GbdtModel, x: &FeatureMatrix) -> Result<Vec<f64>, GbdtError> {
    model.predict(x)
}
