/// A node of a regression tree. Rows with `bin <= threshold_bin` go left.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold_bin: u8,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Binary regression tree stored as a node arena; node 0 is the root.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Leaf value reached by a row whose bins are given by `bin_of`.
    #[inline]
    pub fn score(&self, bin_of: impl Fn(usize) -> u8) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold_bin,
                    left,
                    right,
                } => {
                    idx = if bin_of(*feature) <= *threshold_bin {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Checks arena shape: every child index exists, each non-root node has
    /// exactly one parent and the root has none.
    pub fn is_well_formed(&self) -> bool {
        let mut parents = vec![0usize; self.nodes.len()];
        for n in &self.nodes {
            if let Node::Split { left, right, .. } = n {
                if *left >= self.nodes.len() || *right >= self.nodes.len() || left == right {
                    return false;
                }
                parents[*left] += 1;
                parents[*right] += 1;
            }
        }
        !self.nodes.is_empty() && parents[0] == 0 && parents[1..].iter().all(|&p| p == 1)
    }
}
