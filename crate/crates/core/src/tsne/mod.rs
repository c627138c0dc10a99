//! Two-dimensional geometry of task vectors: cosine-distance t-SNE and
//! silhouette-based cluster separation.

mod embeddings;
mod optimize;
mod output;
mod silhouette;

pub use embeddings::{cosine_distance_matrix, load_embeddings, Embedding, EmbeddingSet, TaskLabel};
pub use optimize::{
    best_projection, calibrate, joint_probabilities, kl_divergence, kl_gradient, tsne,
    tsne_distances, tsne_seeds, Calibration, Projection2D, TsneConfig,
};
pub use output::{
    render_svg, silhouette_summary, write_projection_csv, write_silhouette_csv, SilhouetteRow,
};
pub use silhouette::{cluster_separation, silhouette_samples};
