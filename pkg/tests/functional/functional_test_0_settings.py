class TestSettings:
    def test_1_can_load_revertgraph_settings(self):
        from revertgraph.load_settings import settings
        assert settings.SPLIT_RATIO == 0.8
        assert settings.SOURCE_SUFFIXES == ('.py',)

    def test_2_get_setting_returns_copy(self):
        from revertgraph.load_settings import settings, get_setting
        gcn = get_setting('GCN')
        gcn['epochs'] = -1
        assert settings.GCN['epochs'] == 200

    def test_3_overrides_key_by_key(self):
        from revertgraph.load_settings import get_setting
        gcn = get_setting('GCN', {'epochs': 5})
        assert gcn['epochs'] == 5
        assert gcn['hidden_dim'] == 16

    def test_4_version(self):
        from revertgraph.version import get_version
        assert get_version().startswith('0.1.0')
