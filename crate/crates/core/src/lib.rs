//! Exact intersection theory on iterated blowups, projective bundles and
//! Grassmannians, applied to counting nodal curves in linear systems on
//! surfaces and multi-tangent planes to threefolds.

pub mod cli;
pub mod contact;
pub mod ring;
pub mod sheaf;
pub mod spaces;
pub mod surfaces;
pub mod threefolds;
