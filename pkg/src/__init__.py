"""clipscore: action quality assessment from video clips."""
