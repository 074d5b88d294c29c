pub mod attention;
pub mod data;
pub mod metrics;
pub mod model;
pub mod shap;
pub mod tensor;
pub mod training;
