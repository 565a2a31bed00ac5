pub mod domain;
pub mod grading;
pub mod mesh;
pub mod meshgen;
pub mod profile;

pub use domain::{DomainKind, DomainSpec, Side};
pub use grading::{refine_toward_corner, GradingSpec};
pub use mesh::{BottomCurve, BoundaryEdge, BoundaryLabel, Mesh, MeshStats, Point};
pub use meshgen::{
    build_cell_mesh, build_quarter_plane_mesh, build_rough_composite, build_sublayer_mesh,
    build_unit_square_mesh, unit_square_cells,
};
pub use profile::{BottomSampling, ProfileReport, RoughProfile};
