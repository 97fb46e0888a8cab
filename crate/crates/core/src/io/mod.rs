//! File formats: tensors, WAV, configuration, heatmaps and `key=value`
//! sidecars.

mod config;
mod kv;
mod meta;
mod pgm;
mod tensor;
mod wav;

pub use config::{load_config, parse_config, render_config, LoadedConfig};
pub use kv::{format_list, KvList};
pub use meta::{get_scene, put_mix_meta, put_scene};
pub use pgm::{decode_pgm, read_pgm, render_pgm, write_pgm, PgmImage};
pub use tensor::{read_tensor, write_tensor, DType, Tensor, TensorData, TENSOR_MAGIC};
pub use wav::{decode_wav, encode_wav, read_wav, write_wav, SampleFormat};
