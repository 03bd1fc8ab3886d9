//! Venue comparison in 2-D: TF-IDF vectors over idea texts, an exact t-SNE
//! embedding, and per-venue density grids on a shared frame.

pub mod density;
pub mod export;
pub mod tfidf;
pub mod tsne;

pub use density::{density_grid, DensityFrame, Grid};
pub use export::{export, ExportManifest};
pub use tfidf::{tfidf, DocVector, Document, TfidfModel};
pub use tsne::{tsne, EmbeddedPoint, TsneParams, TsneRun};
