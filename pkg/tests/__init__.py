# Tests package for graphdream
