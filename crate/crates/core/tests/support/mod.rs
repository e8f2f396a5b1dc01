#![allow(dead_code)]

pub mod oracle;
pub mod gen;
pub mod patch_props;
pub mod exam_props;
pub mod loop_cases;
