"""seisdiff tests"""
