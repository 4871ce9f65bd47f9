# donning – daemon-free layer-donning image builder
