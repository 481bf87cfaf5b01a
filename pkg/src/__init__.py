# Off-PAC source package
