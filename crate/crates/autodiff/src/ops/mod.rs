mod conv;
mod elementwise;
mod linalg;
mod norm;
mod pool;
mod reduce;
mod sample;
mod shape;
mod softmax;
mod spatial;

pub use elementwise::Activation;
