# Report emission
