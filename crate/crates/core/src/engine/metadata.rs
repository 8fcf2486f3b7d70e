use crate::boundary::ConsentBoundary;

/// The boundary a viewer is allowed to see: only when the author opted in
/// and only for viewers already inside the audience. Otherwise the node is
/// presented exactly like a public one.
pub fn boundary_metadata_view(boundary: &ConsentBoundary, in_audience: bool) -> Option<&ConsentBoundary> {
    (boundary.show_boundary && in_audience).then_some(boundary)
}
