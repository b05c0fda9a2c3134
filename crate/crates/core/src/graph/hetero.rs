use std::fmt;

use super::GraphError;

/// Edge relation. A follow edge `u → v` puts `v` in `N_following(u)` and `u`
/// in `N_follower(v)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    Following,
    Follower,
}

impl Relation {
    pub const ALL: [Relation; 2] = [Relation::Following, Relation::Follower];

    pub fn index(self) -> usize {
        match self {
            Relation::Following => 0,
            Relation::Follower => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Following => "following",
            Relation::Follower => "follower",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "following" => Some(Relation::Following),
            "follower" => Some(Relation::Follower),
            _ => None,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Compressed adjacency lists: `neighbors[offsets[i]..offsets[i+1]]` is sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Csr {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Csr {
    pub fn empty(n: usize) -> Self {
        Self {
            offsets: vec![0; n + 1],
            neighbors: Vec::new(),
        }
    }

    /// Builds from per-node lists; sorts and removes duplicates.
    pub fn from_lists(mut lists: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for l in &mut lists {
            l.sort_unstable();
            l.dedup();
            neighbors.extend_from_slice(l);
            offsets.push(neighbors.len());
        }
        Self { offsets, neighbors }
    }

    /// Validates raw parts: monotone offsets, sorted unique in-range neighbors.
    pub fn from_parts(
        offsets: Vec<usize>,
        neighbors: Vec<usize>,
        n_nodes: usize,
    ) -> Result<Self, GraphError> {
        if offsets.len() != n_nodes + 1 || offsets[0] != 0 {
            return Err(GraphError::BadOffsets);
        }
        if offsets.windows(2).any(|w| w[0] > w[1]) || *offsets.last().unwrap() != neighbors.len() {
            return Err(GraphError::BadOffsets);
        }
        let csr = Self { offsets, neighbors };
        for i in 0..n_nodes {
            let ns = csr.neighbors(i);
            if let Some(&bad) = ns.iter().find(|&&j| j >= n_nodes) {
                return Err(GraphError::NeighborOutOfRange {
                    node: i,
                    neighbor: bad,
                    n_nodes,
                });
            }
            if ns.windows(2).any(|w| w[0] >= w[1]) {
                return Err(GraphError::UnsortedNeighbors { node: i });
            }
        }
        Ok(csr)
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.neighbors.len()
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[usize] {
        &self.neighbors
    }

    fn to_lists(&self) -> Vec<Vec<usize>> {
        (0..self.n_rows()).map(|i| self.neighbors(i).to_vec()).collect()
    }
}

/// Users plus the two follow relations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeteroGraph {
    n_nodes: usize,
    relations: [Csr; 2],
}

impl HeteroGraph {
    pub fn new(n_nodes: usize, following: Csr, follower: Csr) -> Result<Self, GraphError> {
        for csr in [&following, &follower] {
            if csr.n_rows() != n_nodes {
                return Err(GraphError::BadOffsets);
            }
        }
        Ok(Self {
            n_nodes,
            relations: [following, follower],
        })
    }

    pub fn edgeless(n_nodes: usize) -> Self {
        Self {
            n_nodes,
            relations: [Csr::empty(n_nodes), Csr::empty(n_nodes)],
        }
    }

    /// Materializes directed follow edges `(u, v)` into both relations.
    pub fn from_follow_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut following = vec![Vec::new(); n_nodes];
        let mut follower = vec![Vec::new(); n_nodes];
        for &(u, v) in edges {
            for x in [u, v] {
                if x >= n_nodes {
                    return Err(GraphError::NodeOutOfRange { node: x, n_nodes });
                }
            }
            following[u].push(v);
            follower[v].push(u);
        }
        Ok(Self {
            n_nodes,
            relations: [Csr::from_lists(following), Csr::from_lists(follower)],
        })
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    #[inline]
    pub fn relation(&self, r: Relation) -> &Csr {
        &self.relations[r.index()]
    }

    #[inline]
    pub fn neighbors(&self, r: Relation, i: usize) -> &[usize] {
        self.relations[r.index()].neighbors(i)
    }

    pub fn edge_count(&self) -> usize {
        self.relations.iter().map(Csr::nnz).sum()
    }

    /// Relabels nodes: old node `u` becomes `perm[u]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n_nodes, "permutation length");
        let relabel = |csr: &Csr| {
            let mut lists = vec![Vec::new(); self.n_nodes];
            for (u, ns) in csr.to_lists().into_iter().enumerate() {
                lists[perm[u]] = ns.into_iter().map(|j| perm[j]).collect();
            }
            Csr::from_lists(lists)
        };
        Self {
            n_nodes: self.n_nodes,
            relations: [relabel(&self.relations[0]), relabel(&self.relations[1])],
        }
    }

    /// Union of both relations, symmetrized, with a self-loop on every node.
    pub fn homogenized(&self) -> Csr {
        let mut lists: Vec<Vec<usize>> = (0..self.n_nodes).map(|i| vec![i]).collect();
        for csr in &self.relations {
            for i in 0..self.n_nodes {
                for &j in csr.neighbors(i) {
                    lists[i].push(j);
                    lists[j].push(i);
                }
            }
        }
        Csr::from_lists(lists)
    }
}
