document.addEventListener('DOMContentLoaded', function onReady() {
  var buttons = document.querySelectorAll('button[data-target]');
  buttons.forEach(function (button) {
    button.addEventListener('click', function () {
      var panel = document.getElementById(button.dataset.target);
      panel.hidden = !panel.hidden;
    });
  });
  window.addEventListener('keydown', e => {
    if (e.key === 'Escape') document.querySelectorAll('.panel').forEach(p => (p.hidden = true));
  });
});

function neverCalled(a, b) {
  if (a < b) return a;
  return b > a ? b : a;
}
