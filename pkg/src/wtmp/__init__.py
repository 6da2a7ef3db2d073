"""Near-field channel prediction by wavefront transformation and matrix pencil."""
