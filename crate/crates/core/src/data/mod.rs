//! Dataset generation, ingestion, preprocessing, and splitting.

mod csv;
mod mixture;
mod pca;
mod sine;
mod split;
mod tfidf;

pub use csv::{load_domains_csv, read_domain_csv, write_domain_csv};
pub use mixture::{gen_mixture_domains, MixtureBenchConfig};
pub use pca::{pca_fit_transform, PcaModel};
pub use sine::{gen_sine_domains, SineBenchConfig};
pub use split::split_kfold;
pub use tfidf::tfidf_transform;
