# Test package for offpac
