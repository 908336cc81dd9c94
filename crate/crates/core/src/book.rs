// Runs the guide's snippets as doctests so the book cannot drift from the API.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}
#[doc = include_str!("../../../book/src/edge-layout.md")]
mod edge_layout {}
#[doc = include_str!("../../../book/src/smoothness.md")]
mod smoothness {}
#[doc = include_str!("../../../book/src/batch.md")]
mod batch {}
#[doc = include_str!("../../../book/src/streaming.md")]
mod streaming {}
#[doc = include_str!("../../../book/src/online.md")]
mod online {}
#[doc = include_str!("../../../book/src/synthetic.md")]
mod synthetic {}
#[doc = include_str!("../../../book/src/experiments.md")]
mod experiments {}
#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
