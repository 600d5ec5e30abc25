pub mod bfs_oracle;
pub mod effort_oracle;
pub mod invariants;
pub mod runs;
