#![allow(dead_code)]

pub mod bench;
pub mod evalfix;
pub mod gradcheck;
pub mod records;
pub mod sine;
