# Stateless services and the content-addressed store
