//! Structured tetrahedral box meshes, box partitions and the
//! interior / face / wirebasket-edge / vertex node taxonomy.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vtk::VtkWriter;

/// Which box faces carry homogeneous Dirichlet data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DirichletFaces {
    /// Every face of the box (Poisson problem).
    All,
    /// Only the `x = 0` face (clamped beam).
    XMin,
    None,
}

#[derive(Debug, Clone)]
pub struct BoxMesh {
    cells: [usize; 3],
    extents: [f64; 3],
    nodes: Vec<[f64; 3]>,
    tets: Vec<[usize; 4]>,
    tet_cell: Vec<usize>,
    dirichlet: Vec<bool>,
}

// Kuhn subdivision: one tet per axis permutation, all sharing the main diagonal.
const KUHN_PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

impl BoxMesh {
    pub fn build(cells: [usize; 3], extents: [f64; 3], dirichlet: DirichletFaces) -> Result<Self> {
        if cells.iter().any(|&c| c == 0) {
            return Err(Error::Config(format!("cell counts must be positive, got {cells:?}")));
        }
        if extents.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Config(format!("extents must be positive, got {extents:?}")));
        }
        let [nx, ny, nz] = cells;
        let h = [extents[0] / nx as f64, extents[1] / ny as f64, extents[2] / nz as f64];
        let node_id = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);

        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
        let mut is_dirichlet = Vec::with_capacity(nodes.capacity());
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    nodes.push([i as f64 * h[0], j as f64 * h[1], k as f64 * h[2]]);
                    let on_boundary = i == 0 || j == 0 || k == 0 || i == nx || j == ny || k == nz;
                    is_dirichlet.push(match dirichlet {
                        DirichletFaces::All => on_boundary,
                        DirichletFaces::XMin => i == 0,
                        DirichletFaces::None => false,
                    });
                }
            }
        }

        let mut tets = Vec::with_capacity(6 * nx * ny * nz);
        let mut tet_cell = Vec::with_capacity(tets.capacity());
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let cell = i + nx * (j + ny * k);
                    for perm in KUHN_PERMUTATIONS {
                        let mut corner = [i, j, k];
                        let mut tet = [node_id(i, j, k); 4];
                        for (slot, &axis) in perm.iter().enumerate() {
                            corner[axis] += 1;
                            tet[slot + 1] = node_id(corner[0], corner[1], corner[2]);
                        }
                        if signed_volume(&tet.map(|n| nodes[n])) < 0.0 {
                            tet.swap(2, 3);
                        }
                        tets.push(tet);
                        tet_cell.push(cell);
                    }
                }
            }
        }
        Ok(Self {
            cells,
            extents,
            nodes,
            tets,
            tet_cell,
            dirichlet: is_dirichlet,
        })
    }

    pub fn cells(&self) -> [usize; 3] {
        self.cells
    }

    pub fn extents(&self) -> [f64; 3] {
        self.extents
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn tet_coords(&self, e: usize) -> [[f64; 3]; 4] {
        self.tets[e].map(|n| self.nodes[n])
    }

    pub fn is_dirichlet(&self, node: usize) -> bool {
        self.dirichlet[node]
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet
    }

    /// Grid coordinates `(i, j, k)` of a node.
    pub fn grid_index(&self, node: usize) -> [usize; 3] {
        let [nx, ny, _] = self.cells;
        [node % (nx + 1), (node / (nx + 1)) % (ny + 1), node / ((nx + 1) * (ny + 1))]
    }

    pub fn node_at(&self, i: usize, j: usize, k: usize) -> usize {
        let [nx, ny, _] = self.cells;
        i + (nx + 1) * (j + (ny + 1) * k)
    }

    /// Grid coordinates of the hexahedral cell an element came from.
    pub fn element_cell(&self, e: usize) -> [usize; 3] {
        let [nx, ny, _] = self.cells;
        let c = self.tet_cell[e];
        [c % nx, (c / nx) % ny, c / (nx * ny)]
    }

    /// Lumped nodal volumes (a quarter of each adjacent tet volume).
    pub fn lumped_volumes(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.nodes.len()];
        for e in 0..self.tets.len() {
            let v = signed_volume(&self.tet_coords(e)) / 4.0;
            for &n in &self.tets[e] {
                w[n] += v;
            }
        }
        w
    }

    pub fn volume(&self) -> f64 {
        self.extents.iter().product()
    }

    pub fn write_vtk<W: Write>(&self, w: W, partition: Option<&Partition>, classes: Option<&Classification>) -> Result<()> {
        let mut vtk = VtkWriter::new(w, "box mesh", &self.nodes, &self.tets)?;
        if let Some(p) = partition {
            let sub: Vec<f64> = p.element_subdomain.iter().map(|&s| s as f64).collect();
            vtk.cell_scalars("subdomain", &sub)?;
        }
        if let Some(c) = classes {
            let codes: Vec<f64> = c.classes.iter().map(|c| c.code() as f64).collect();
            vtk.point_scalars("node_class", &codes)?;
        }
        Ok(())
    }
}

pub fn signed_volume(x: &[[f64; 3]; 4]) -> f64 {
    let d = |a: usize| [x[a][0] - x[0][0], x[a][1] - x[0][1], x[a][2] - x[0][2]];
    let (a, b, c) = (d(1), d(2), d(3));
    (a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])) / 6.0
}

/// Non-overlapping box decomposition of a [`BoxMesh`].
#[derive(Debug, Clone)]
pub struct Partition {
    grid: [usize; 3],
    cells_per_box: [usize; 3],
    h: [f64; 3],
    element_subdomain: Vec<usize>,
    subdomain_elements: Vec<Vec<usize>>,
    subdomain_nodes: Vec<Vec<usize>>,
    sharing: Vec<Vec<usize>>,
}

impl Partition {
    pub fn boxes(mesh: &BoxMesh, grid: [usize; 3]) -> Result<Self> {
        let cells = mesh.cells();
        let mut cells_per_box = [0; 3];
        for (a, axis) in ['x', 'y', 'z'].into_iter().enumerate() {
            if grid[a] == 0 || cells[a] % grid[a] != 0 {
                return Err(Error::Divisibility {
                    axis,
                    cells: cells[a],
                    parts: grid[a],
                });
            }
            cells_per_box[a] = cells[a] / grid[a];
        }
        let n_sub = grid.iter().product();
        let mut element_subdomain = Vec::with_capacity(mesh.tets().len());
        let mut subdomain_elements = vec![Vec::new(); n_sub];
        let mut sharing: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_nodes()];
        for e in 0..mesh.tets().len() {
            let c = mesh.element_cell(e);
            let b = [c[0] / cells_per_box[0], c[1] / cells_per_box[1], c[2] / cells_per_box[2]];
            let s = b[0] + grid[0] * (b[1] + grid[1] * b[2]);
            element_subdomain.push(s);
            subdomain_elements[s].push(e);
            for &n in &mesh.tets()[e] {
                if !sharing[n].contains(&s) {
                    sharing[n].push(s);
                }
            }
        }
        for s in &mut sharing {
            s.sort_unstable();
        }
        let mut subdomain_nodes = vec![Vec::new(); n_sub];
        for (n, subs) in sharing.iter().enumerate() {
            for &s in subs {
                subdomain_nodes[s].push(n);
            }
        }
        let ext = mesh.extents();
        Ok(Self {
            grid,
            cells_per_box,
            h: [ext[0] / grid[0] as f64, ext[1] / grid[1] as f64, ext[2] / grid[2] as f64],
            element_subdomain,
            subdomain_elements,
            subdomain_nodes,
            sharing,
        })
    }

    pub fn grid(&self) -> [usize; 3] {
        self.grid
    }

    pub fn n_subdomains(&self) -> usize {
        self.subdomain_elements.len()
    }

    /// Subdomain box edge lengths.
    pub fn box_size(&self) -> [f64; 3] {
        self.h
    }

    pub fn cells_per_box(&self) -> [usize; 3] {
        self.cells_per_box
    }

    pub fn element_subdomain(&self) -> &[usize] {
        &self.element_subdomain
    }

    pub fn elements(&self, s: usize) -> &[usize] {
        &self.subdomain_elements[s]
    }

    pub fn nodes(&self, s: usize) -> &[usize] {
        &self.subdomain_nodes[s]
    }

    pub fn multiplicity(&self, node: usize) -> usize {
        self.sharing[node].len()
    }

    pub fn sharing(&self, node: usize) -> &[usize] {
        &self.sharing[node]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeClass {
    Dirichlet,
    Interior(usize),
    Face,
    WirebasketEdge,
    Vertex,
}

impl NodeClass {
    pub fn is_interface(self) -> bool {
        matches!(self, NodeClass::Face | NodeClass::WirebasketEdge | NodeClass::Vertex)
    }

    pub fn is_wirebasket(self) -> bool {
        matches!(self, NodeClass::WirebasketEdge | NodeClass::Vertex)
    }

    /// Integer code used in VTK output.
    pub fn code(self) -> i32 {
        match self {
            NodeClass::Dirichlet => -1,
            NodeClass::Interior(_) => 0,
            NodeClass::Face => 1,
            NodeClass::WirebasketEdge => 2,
            NodeClass::Vertex => 3,
        }
    }
}

/// Global numbering of one node subset (ascending node id).
#[derive(Debug, Clone, Default)]
pub struct NodeSet {
    nodes: Vec<usize>,
    index: HashMap<usize, usize>,
}

impl NodeSet {
    fn from_nodes(nodes: Vec<usize>) -> Self {
        let index = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        Self { nodes, index }
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, node: usize) -> Option<usize> {
        self.index.get(&node).copied()
    }
}

#[derive(Debug, Clone)]
pub struct Classification {
    classes: Vec<NodeClass>,
    interface: NodeSet,
    faces: NodeSet,
    wirebasket: NodeSet,
    vertices: NodeSet,
}

impl Classification {
    /// Tags every node. Interface nodes (shared by two or more boxes) are
    /// split by how many subdomain-box planes pass through them: one plane
    /// gives a face node, two an interface edge, three a vertex. Box planes
    /// on the domain boundary count, so the rim of an interface face on a
    /// non-Dirichlet boundary belongs to the wirebasket. Dirichlet nodes
    /// are removed from every set.
    pub fn classify(mesh: &BoxMesh, partition: &Partition) -> Self {
        let cpb = partition.cells_per_box();
        let classes: Vec<NodeClass> = (0..mesh.n_nodes())
            .map(|n| {
                if mesh.is_dirichlet(n) {
                    return NodeClass::Dirichlet;
                }
                let subs = partition.sharing(n);
                if subs.len() == 1 {
                    return NodeClass::Interior(subs[0]);
                }
                let g = mesh.grid_index(n);
                let planes = (0..3).filter(|&a| g[a] % cpb[a] == 0).count();
                match planes {
                    0 | 1 => NodeClass::Face,
                    2 => NodeClass::WirebasketEdge,
                    _ => NodeClass::Vertex,
                }
            })
            .collect();
        let pick = |f: fn(NodeClass) -> bool| {
            NodeSet::from_nodes((0..classes.len()).filter(|&n| f(classes[n])).collect())
        };
        Self {
            interface: pick(NodeClass::is_interface),
            faces: pick(|c| c == NodeClass::Face),
            wirebasket: pick(NodeClass::is_wirebasket),
            vertices: pick(|c| c == NodeClass::Vertex),
            classes,
        }
    }

    pub fn class(&self, node: usize) -> NodeClass {
        self.classes[node]
    }

    pub fn classes(&self) -> &[NodeClass] {
        &self.classes
    }

    pub fn interface(&self) -> &NodeSet {
        &self.interface
    }

    pub fn faces(&self) -> &NodeSet {
        &self.faces
    }

    pub fn wirebasket(&self) -> &NodeSet {
        &self.wirebasket
    }

    pub fn vertices(&self) -> &NodeSet {
        &self.vertices
    }

    /// Local numbering of subdomain `s`: interior nodes first, then
    /// interface nodes, both by ascending global id.
    pub fn layout(&self, partition: &Partition, s: usize, components: usize) -> SubdomainLayout {
        let mut interior_nodes = Vec::new();
        let mut interface_nodes = Vec::new();
        for &n in partition.nodes(s) {
            match self.classes[n] {
                NodeClass::Dirichlet => {}
                NodeClass::Interior(_) => interior_nodes.push(n),
                _ => interface_nodes.push(n),
            }
        }
        let interface_slots = interface_nodes
            .iter()
            .map(|&n| self.interface.index_of(n).expect("interface node"))
            .collect();
        let local_index = interior_nodes
            .iter()
            .chain(&interface_nodes)
            .enumerate()
            .map(|(l, &n)| (n, l))
            .collect();
        SubdomainLayout {
            subdomain: s,
            components,
            interior_nodes,
            interface_nodes,
            interface_slots,
            local_index,
        }
    }
}

/// Degree-of-freedom numbering inside one subdomain.
///
/// Local dof of node position `l` and component `c` is `l * components + c`;
/// interior dofs occupy `0..n_interior_dofs()`.
#[derive(Debug, Clone)]
pub struct SubdomainLayout {
    pub subdomain: usize,
    pub components: usize,
    pub interior_nodes: Vec<usize>,
    pub interface_nodes: Vec<usize>,
    /// Global interface index of each local interface node.
    pub interface_slots: Vec<usize>,
    local_index: HashMap<usize, usize>,
}

impl SubdomainLayout {
    pub fn n_interior_dofs(&self) -> usize {
        self.interior_nodes.len() * self.components
    }

    pub fn n_interface_dofs(&self) -> usize {
        self.interface_nodes.len() * self.components
    }

    pub fn n_dofs(&self) -> usize {
        self.n_interior_dofs() + self.n_interface_dofs()
    }

    pub fn local_node(&self, node: usize) -> Option<usize> {
        self.local_index.get(&node).copied()
    }

    pub fn dof(&self, node: usize, component: usize) -> Option<usize> {
        self.local_node(node).map(|l| l * self.components + component)
    }
}
